#include "ensemble/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"

namespace lidarsphere {
namespace {

constexpr std::uint16_t kLgtsVersion = 1;
constexpr std::size_t kPixelChunk = 4096;

void check_stack(const LogitStack& s) {
  if (s.models() == 0 || s.classes() < 2) throw InvalidArgument("logit stack needs M >= 1 and C >= 2");
  s.check_finite();
}

// Numerically stable softmax of `z` into `p`; returns the entropy of p in nats.
double softmax_entropy(std::span<const double> z, std::span<double> p) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) sum += (p[c] = std::exp(z[c] - zmax));
  double h = 0.0;
  for (double& v : p) {
    v /= sum;
    h -= v * std::log(std::max(v, kProbFloor));
  }
  return h;
}

void check_pred_gt(const ProbabilityMap& pred, const LabelMask& gt) {
  if (!gt.same_shape(pred.height, pred.width)) throw InvalidArgument("loss: prediction and ground truth differ in size");
  if (pred.data.size() != pred.classes * pred.height * pred.width)
    throw InvalidArgument("loss: probability map storage does not match its shape");
  for (std::uint8_t g : gt.pixels())
    if (g >= pred.classes) throw InvalidArgument("loss: ground-truth class " + std::to_string(g) + " >= class count");
}

}  // namespace

LogitStack::LogitStack(std::size_t models, std::size_t classes, std::size_t height, std::size_t width, double fill)
    : m_(models), c_(classes), h_(height), w_(width) {
  if (models == 0) throw InvalidArgument("logit stack needs at least one model");
  if (classes < 2) throw InvalidArgument("logit stack needs at least two classes");
  data_.assign(models * classes * height * width, fill);
}

void LogitStack::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      const std::size_t plane = i / (h_ * w_), flat = i % (h_ * w_);
      throw DataError("non-finite logit at model " + std::to_string(plane / c_) + ", class " +
                      std::to_string(plane % c_) + ", pixel (" + std::to_string(flat / w_) + ", " +
                      std::to_string(flat % w_) + ")");
    }
  }
}

FuseResult fuse(const LogitStack& stack, unsigned workers) {
  check_stack(stack);
  const std::size_t m = stack.models(), nc = stack.classes(), n = stack.pixels();
  FuseResult out;
  out.probabilities = {nc, stack.height(), stack.width(), std::vector<double>(nc * n)};
  out.labels = LabelMask(stack.height(), stack.width());
  parallel_for_chunks(n, kPixelChunk, workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> z(nc), p(nc);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t c = 0; c < nc; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += stack.at(k, c, i);
        z[c] = s / static_cast<double>(m);
      }
      softmax_entropy(z, p);
      std::size_t best = 0;
      for (std::size_t c = 0; c < nc; ++c) {
        out.probabilities.data[c * n + i] = p[c];
        if (p[c] > p[best]) best = c;
      }
      out.labels[i] = static_cast<std::uint8_t>(best);
    }
  });
  return out;
}

UncertaintyMaps uncertainty(const LogitStack& stack, unsigned workers) {
  check_stack(stack);
  const std::size_t m = stack.models(), nc = stack.classes(), n = stack.pixels();
  UncertaintyMaps u{RealMap(stack.height(), stack.width()), RealMap(stack.height(), stack.width()),
                    RealMap(stack.height(), stack.width())};
  parallel_for_chunks(n, kPixelChunk, workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> z(nc), zk(nc), p(nc);
    for (std::size_t i = b; i < e; ++i) {
      std::fill(z.begin(), z.end(), 0.0);
      double expected = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t c = 0; c < nc; ++c) {
          zk[c] = stack.at(k, c, i);
          z[c] += zk[c];
        }
        expected += softmax_entropy(zk, p);
      }
      for (double& v : z) v /= static_cast<double>(m);
      expected /= static_cast<double>(m);
      const double total = softmax_entropy(z, p);
      u.total[i] = total;
      u.expected[i] = expected;
      u.epistemic[i] = std::max(0.0, total - expected);
    }
  });
  return u;
}

double dice_loss(std::span<const double> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) throw InvalidArgument("dice_loss: prediction and ground truth differ in size");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] > 1) throw InvalidArgument("dice_loss: ground truth must be binary");
    inter += pred[i] * gt[i];
    sp += pred[i];
    sg += gt[i];
  }
  if (sp + sg == 0.0) return 0.0;
  return 1.0 - 2.0 * inter / (sp + sg);
}

double dice_loss(const ProbabilityMap& pred, const LabelMask& gt) {
  check_pred_gt(pred, gt);
  std::vector<std::uint8_t> onehot(gt.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < pred.classes; ++c) {
    for (std::size_t i = 0; i < gt.size(); ++i) onehot[i] = gt[i] == c ? 1 : 0;
    sum += dice_loss(pred.plane(c), onehot);
  }
  return sum / static_cast<double>(pred.classes);
}

double cross_entropy_loss(const ProbabilityMap& pred, const LabelMask& gt) {
  check_pred_gt(pred, gt);
  if (gt.size() == 0) throw InvalidArgument("cross_entropy_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s -= std::log(std::max(pred.at(gt[i], i), kProbFloor));
  return s / static_cast<double>(gt.size());
}

double combined_loss(const ProbabilityMap& pred, const LabelMask& gt) {
  return 0.5 * dice_loss(pred, gt) + 0.5 * cross_entropy_loss(pred, gt);
}

LogitStack concat_models(const std::vector<LogitStack>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_models: no stacks given");
  const auto& f = parts.front();
  std::size_t m = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p.classes() != f.classes() || p.height() != f.height() || p.width() != f.width())
      throw DataError("logit stack " + std::to_string(i) + " is " + std::to_string(p.classes()) + "x" +
                      std::to_string(p.height()) + "x" + std::to_string(p.width()) + ", stack 0 is " +
                      std::to_string(f.classes()) + "x" + std::to_string(f.height()) + "x" + std::to_string(f.width()));
    m += p.models();
  }
  LogitStack out(m, f.classes(), f.height(), f.width());
  std::size_t k0 = 0;
  for (const auto& p : parts) {
    for (std::size_t k = 0; k < p.models(); ++k)
      for (std::size_t c = 0; c < p.classes(); ++c) std::ranges::copy(p.plane(k, c), out.plane(k0 + k, c).begin());
    k0 += p.models();
  }
  return out;
}

void save_lgts(const LogitStack& stack, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("LGTS", 4);
  binio::put<std::uint16_t>(out, kLgtsVersion);
  for (std::size_t v : {stack.models(), stack.classes(), stack.height(), stack.width()})
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  std::vector<float> buf(stack.data().size());
  std::transform(stack.data().begin(), stack.data().end(), buf.begin(), [](double v) { return static_cast<float>(v); });
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path.string());
}

LogitStack load_lgts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string where = path.string();
  binio::expect_magic(in, "LGTS", where);
  const auto version = binio::get<std::uint16_t>(in, "LGTS version");
  if (version != kLgtsVersion) throw DataError(where + ": unsupported LGTS version " + std::to_string(version));
  const auto m = binio::get<std::uint32_t>(in, "LGTS model count");
  const auto c = binio::get<std::uint32_t>(in, "LGTS class count");
  const auto h = binio::get<std::uint32_t>(in, "LGTS height");
  const auto w = binio::get<std::uint32_t>(in, "LGTS width");
  if (m == 0 || c < 2) throw DataError(where + ": LGTS needs M >= 1 and C >= 2");
  const std::uint64_t count = std::uint64_t{m} * c * h * w;
  if (count > (std::uint64_t{1} << 32)) throw DataError(where + ": implausible LGTS size");
  std::vector<float> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw DataError(where + ": truncated LGTS payload");
  LogitStack s(m, c, h, w);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t cc = 0; cc < c; ++cc) {
      auto dst = s.plane(k, cc);
      const float* src = buf.data() + (k * c + cc) * dst.size();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
    }
  s.check_finite();
  return s;
}

LogitStack baseline_segment(const FeatureCube& features, const LabelMask& train_mask,
                            std::span<const std::uint64_t> member_seeds, const BaselineOptions& options) {
  if (member_seeds.empty()) throw InvalidArgument("baseline_segment: need at least one member");
  if (!train_mask.same_shape(features.height(), features.width()))
    throw InvalidArgument("baseline_segment: training mask does not match the feature cube");
  if (features.channel_count() == 0) throw InvalidArgument("baseline_segment: feature cube has no channels");
  const std::size_t nc = options.classes, d = features.channel_count(), n = features.height() * features.width();

  std::vector<std::uint32_t> labeled;
  std::vector<std::size_t> seen(nc, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!features.valid()[i] || train_mask[i] == kVoid) continue;
    if (train_mask[i] >= nc)
      throw InvalidArgument("baseline_segment: training label " + std::to_string(train_mask[i]) + " >= class count");
    labeled.push_back(static_cast<std::uint32_t>(i));
    ++seen[train_mask[i]];
  }
  if (std::count_if(seen.begin(), seen.end(), [](std::size_t s) { return s > 0; }) < 2)
    throw DataError("baseline_segment: training mask holds fewer than two classes on valid pixels");

  std::vector<double> all(n * d);
  for (std::size_t i = 0; i < n; ++i) features.pixel(i, std::span<double>(all).subspan(i * d, d));

  LogitStack out(member_seeds.size(), nc, features.height(), features.width());
  for (std::size_t m = 0; m < member_seeds.size(); ++m) {
    Rng rng(member_seeds[m]);
    std::vector<double> x(labeled.size() * d);
    std::vector<std::uint8_t> y(labeled.size());
    for (std::size_t k = 0; k < labeled.size(); ++k) {
      const std::uint32_t px = labeled[rng.below(labeled.size())];
      std::copy_n(all.begin() + static_cast<std::ptrdiff_t>(px * d), d, x.begin() + static_cast<std::ptrdiff_t>(k * d));
      y[k] = train_mask[px];
    }
    ForestOptions fo = options.forest;
    fo.seed = member_seeds[m];
    fo.workers = options.workers;
    const RandomForest forest = RandomForest::train({x, d}, y, nc, fo);
    const double denom = std::log(static_cast<double>(forest.tree_count() + nc));
    parallel_for_chunks(n, kPixelChunk, options.workers, [&](std::size_t b, std::size_t e) {
      std::vector<std::uint32_t> votes(nc);
      for (std::size_t i = b; i < e; ++i) {
        if (features.valid()[i])
          forest.predict_votes(std::span<const double>(all).subspan(i * d, d), votes);
        else
          std::fill(votes.begin(), votes.end(), 0u);
        for (std::size_t c = 0; c < nc; ++c) out.at(m, c, i) = std::log(votes[c] + 1.0) - denom;
      }
    });
  }
  return out;
}

LogitStack baseline_segment(const FeatureCube& features, const LabelMask& train_mask, std::size_t models,
                            std::uint64_t seed, const BaselineOptions& options) {
  std::vector<std::uint64_t> seeds(models);
  Rng rng(seed);
  for (auto& s : seeds) s = rng.next();
  return baseline_segment(features, train_mask, seeds, options);
}

}  // namespace lidarsphere
