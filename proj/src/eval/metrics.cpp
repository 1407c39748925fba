#include "eval/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "common/error.hpp"

namespace lidarsphere {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::fp(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t g = 0; g < c_; ++g) s += at(g, c);
  return s - at(c, c);
}

std::uint64_t ConfusionMatrix::fn(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < c_; ++p) s += at(c, p);
  return s - at(c, c);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.c_ != c_) throw InvalidArgument("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> gt, std::span<const std::uint8_t> pred, std::size_t classes,
                          std::span<const std::uint8_t> exclude) {
  if (gt.size() != pred.size()) throw InvalidArgument("confusion: ground truth and prediction differ in size");
  if (classes == 0 || classes > 256) throw InvalidArgument("confusion: class count must lie in [1, 256]");
  std::array<bool, 256> skip{};
  for (std::uint8_t c : exclude) skip[c] = true;
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] >= classes || pred[i] >= classes)
      throw InvalidArgument("confusion: class id " + std::to_string(std::max(gt[i], pred[i])) + " at entry " +
                            std::to_string(i) + " is >= class count " + std::to_string(classes));
    if (!skip[gt[i]]) ++cm.at(gt[i], pred[i]);
  }
  return cm;
}

ConfusionMatrix confusion(const LabelMask& gt, const LabelMask& pred, std::size_t classes,
                          std::span<const std::uint8_t> exclude) {
  if (!gt.same_shape(pred)) throw InvalidArgument("confusion: masks differ in size");
  return confusion(gt.pixels(), pred.pixels(), classes, exclude);
}

double Metrics::mean_iou_excluding(std::span<const std::uint8_t> skip) const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < iou.size(); ++c) {
    if (!iou[c] || std::find(skip.begin(), skip.end(), c) != skip.end()) continue;
    s += *iou[c];
    ++n;
  }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  const std::size_t nc = cm.classes();
  m.recall.resize(nc);
  m.iou.resize(nc);
  const std::uint64_t total = cm.total();
  std::uint64_t trace = 0;
  double rsum = 0.0, isum = 0.0;
  std::size_t rn = 0, in = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    const auto tp = cm.tp(c), fp = cm.fp(c), fn = cm.fn(c);
    trace += tp;
    if (tp + fn > 0) {
      m.recall[c] = static_cast<double>(tp) / static_cast<double>(tp + fn);
      rsum += *m.recall[c];
      ++rn;
    }
    if (tp + fp + fn > 0) {
      m.iou[c] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      isum += *m.iou[c];
      ++in;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.oacc = total ? static_cast<double>(trace) / static_cast<double>(total) : nan;
  m.macc = rn ? rsum / static_cast<double>(rn) : nan;
  m.miou = in ? isum / static_cast<double>(in) : nan;
  return m;
}

double map_entropy(const RealMap& map, const BoolMask* valid, std::size_t bins) {
  if (bins < 2) throw InvalidArgument("map_entropy: need at least two bins");
  if (valid && !valid->same_shape(map)) throw InvalidArgument("map_entropy: mask does not match map");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (valid && !(*valid)[i]) continue;
    const double v = map[i];
    if (!std::isfinite(v)) throw InvalidArgument("map_entropy: non-finite value at pixel " + std::to_string(i));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++n;
  }
  if (n == 0) throw DataError("map_entropy: no valid pixels");
  if (hi == lo) return 0.0;
  std::vector<std::uint64_t> hist(bins, 0);
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (valid && !(*valid)[i]) continue;
    const auto b = static_cast<std::size_t>((map[i] - lo) * scale);
    ++hist[std::min(b, bins - 1)];
  }
  double h = 0.0;
  for (auto k : hist) {
    if (k == 0) continue;
    const double p = static_cast<double>(k) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

std::vector<PrPoint> pr_curve(std::span<const double> score, std::span<const std::uint8_t> errors) {
  if (score.size() != errors.size()) throw InvalidArgument("pr_curve: score and error mask differ in size");
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] > 1) throw InvalidArgument("pr_curve: error mask must be binary");
    if (!std::isfinite(score[i])) throw InvalidArgument("pr_curve: non-finite score");
    positives += errors[i];
  }
  if (positives == 0) throw DataError("pr_curve: error mask has no positives");
  std::vector<std::uint32_t> order(score.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return score[a] > score[b]; });
  std::vector<PrPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, taken = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = score[order[k]];
    while (k < order.size() && score[order[k]] == t) {
      tp += errors[order[k]];
      ++taken;
      ++k;
    }
    curve.push_back({t, static_cast<double>(tp) / static_cast<double>(taken),
                     static_cast<double>(tp) / static_cast<double>(positives)});
  }
  curve[0].precision = curve[1].precision;
  return curve;
}

std::vector<PrPoint> pr_curve(const RealMap& score, const BoolMask& errors, const BoolMask* valid) {
  if (!score.same_shape(errors)) throw InvalidArgument("pr_curve: score and error mask differ in size");
  if (!valid) return pr_curve(score.pixels(), errors.pixels());
  if (!valid->same_shape(score)) throw InvalidArgument("pr_curve: valid mask does not match");
  std::vector<double> s;
  std::vector<std::uint8_t> e;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (!(*valid)[i]) continue;
    s.push_back(score[i]);
    e.push_back(errors[i]);
  }
  return pr_curve(s, e);
}

double auprc(std::span<const PrPoint> curve) {
  if (curve.size() < 2) throw InvalidArgument("auprc: need at least two curve points");
  double a = 0.0;
  for (std::size_t j = 0; j + 1 < curve.size(); ++j) a += (curve[j + 1].recall - curve[j].recall) * curve[j + 1].precision;
  return a;
}

void write_pr_csv(std::span<const PrPoint> curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "threshold,precision,recall\n";
  for (const auto& p : curve) {
    if (std::isinf(p.threshold))
      out << "inf";
    else
      out << p.threshold;
    out << ',' << p.precision << ',' << p.recall << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lidarsphere
