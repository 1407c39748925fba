#include "refine/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"
#include "features/descriptors.hpp"

namespace lidarsphere {

void RefinementConfig::validate() const {
  if (k_vote == 0) throw InvalidArgument("refinement: k_vote must be at least 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("refinement: tau must lie in (0, 1]");
  if (scales.empty()) throw InvalidArgument("refinement: need at least one feature scale");
  for (double s : scales)
    if (!(s > 0.0)) throw InvalidArgument("refinement: feature scales must be positive");
}

std::vector<std::uint8_t> knn_smooth(std::span<const std::uint8_t> labels, const SpatialIndex& index,
                                     std::size_t k_vote, unsigned workers) {
  if (labels.size() != index.size()) throw InvalidArgument("knn_smooth: label count does not match index");
  if (k_vote == 0) throw InvalidArgument("knn_smooth: k_vote must be at least 1");
  if (k_vote >= labels.size())
    throw InvalidArgument("knn_smooth: k_vote " + std::to_string(k_vote) + " must be below the point count " +
                          std::to_string(labels.size()));
  std::vector<std::uint8_t> out(labels.begin(), labels.end());
  parallel_for_chunks(labels.size(), 1024, workers, [&](std::size_t b, std::size_t e) {
    std::array<std::uint32_t, 256> count{};
    std::array<double, 256> weight{};
    for (std::size_t i = b; i < e; ++i) {
      if (labels[i] == kVoid) continue;
      const auto nn = index.knn(i, k_vote);
      for (const auto& n : nn) {
        count[labels[n.id]] = 0;
        weight[labels[n.id]] = 0.0;
      }
      for (const auto& n : nn) {
        const std::uint8_t c = labels[n.id];
        if (c == kVoid) continue;
        ++count[c];
        weight[c] += 1.0 / std::max(n.distance, 1e-12);
      }
      int best = -1;
      for (const auto& n : nn) {
        const std::uint8_t c = labels[n.id];
        if (c == kVoid) continue;
        if (best < 0 || count[c] > count[best] || (count[c] == count[best] && weight[c] > weight[best]) ||
            (count[c] == count[best] && weight[c] == weight[best] && c < best))
          best = c;
      }
      if (best > 0) out[i] = static_cast<std::uint8_t>(best);
    }
  });
  return out;
}

std::vector<std::uint32_t> core_set(std::span<const std::uint8_t> y, std::span<const std::uint8_t> y_hat) {
  if (y.size() != y_hat.size()) throw InvalidArgument("core_set: label arrays differ in length");
  std::vector<std::uint32_t> r;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == y_hat[i] && y[i] != kVoid) r.push_back(static_cast<std::uint32_t>(i));
  return r;
}

std::vector<std::uint32_t> suspect_set(std::span<const std::uint8_t> y, std::span<const std::uint8_t> y_hat,
                                       bool include_void) {
  if (y.size() != y_hat.size()) throw InvalidArgument("suspect_set: label arrays differ in length");
  std::vector<std::uint32_t> s;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool core = y[i] == y_hat[i] && y[i] != kVoid;
    if (!core && (y[i] != kVoid || include_void)) s.push_back(static_cast<std::uint32_t>(i));
  }
  return s;
}

std::vector<double> point_features(const PointCloud& cloud, const SpatialIndex& index, std::span<const double> scales,
                                   unsigned workers, std::span<const std::uint32_t> subset) {
  if (scales.empty()) throw InvalidArgument("point_features: need at least one scale");
  const std::size_t n = cloud.size(), d = point_feature_dim(scales.size());
  std::vector<double> out(n * d, 0.0);
  if (n == 0) return out;
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& p : cloud.points) zmin = std::min<double>(zmin, p.z);
  DescriptorOptions opt;
  opt.workers = workers;
  const auto base = eigen_descriptors(cloud, index, opt, subset);
  std::vector<std::uint8_t> in_subset;
  if (!subset.empty()) {
    in_subset.assign(n, 0);
    for (std::uint32_t id : subset) in_subset.at(id) = 1;
  }
  const auto selected = [&](std::size_t i) { return in_subset.empty() || in_subset[i]; };
  const Vec3 o = cloud.meta.scanner_origin;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3& p = cloud.points[i];
    double* row = out.data() + i * d;
    row[0] = p.z - zmin;
    row[1] = std::sqrt((p.x - o[0]) * (p.x - o[0]) + (p.y - o[1]) * (p.y - o[1]) + (p.z - o[2]) * (p.z - o[2]));
    row[2] = p.intensity;
    if (selected(i))
      for (int k = 0; k < 3; ++k) row[3 + k] = base[i].normal[k];
  }
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const auto f = eigen_descriptors_fixed(cloud, index, scales[s], opt, subset);
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected(i)) continue;
      double* row = out.data() + i * d + 6 + 3 * s;
      row[0] = f[i].curvature;
      row[1] = f[i].anisotropy;
      row[2] = f[i].planarity;
    }
  }
  return out;
}

RandomForest rf_train(const FeatureRows& features, std::span<const std::uint32_t> core,
                      std::span<const std::uint8_t> labels, std::size_t num_classes, const ForestOptions& options) {
  if (labels.size() != features.rows()) throw InvalidArgument("rf_train: label count does not match feature rows");
  std::vector<double> x(core.size() * features.dim);
  std::vector<std::uint8_t> y(core.size());
  for (std::size_t k = 0; k < core.size(); ++k) {
    if (core[k] >= labels.size()) throw InvalidArgument("rf_train: core id out of range");
    const auto row = features.row(core[k]);
    std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(k * features.dim));
    y[k] = labels[core[k]];
  }
  return RandomForest::train({x, features.dim}, y, num_classes, options);
}

RelabelResult rf_relabel(const RandomForest& forest, std::span<const std::uint32_t> suspects,
                         const FeatureRows& features, std::span<const std::uint8_t> y_hat, double tau,
                         unsigned workers) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("rf_relabel: tau must lie in (0, 1]");
  if (features.dim != forest.dim())
    throw InvalidArgument("rf_relabel: feature dimension " + std::to_string(features.dim) + " does not match forest " +
                          std::to_string(forest.dim()));
  if (y_hat.size() != features.rows()) throw InvalidArgument("rf_relabel: label count does not match feature rows");
  RelabelResult r;
  r.labels.assign(y_hat.begin(), y_hat.end());
  std::vector<std::int16_t> adopted(suspects.size(), -1);
  parallel_for_chunks(suspects.size(), 1024, workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> p(forest.num_classes());
    for (std::size_t k = b; k < e; ++k) {
      const std::uint32_t id = suspects[k];
      if (id >= y_hat.size()) throw InvalidArgument("rf_relabel: suspect id out of range");
      forest.predict_proba(features.row(id), p);
      const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      if (p[best] >= tau) adopted[k] = static_cast<std::int16_t>(best);
    }
  });
  for (std::size_t k = 0; k < suspects.size(); ++k) {
    if (adopted[k] < 0) continue;
    const std::uint32_t id = suspects[k];
    ++r.adoptions;
    if (r.labels[id] != adopted[k]) ++r.changed;
    r.labels[id] = static_cast<std::uint8_t>(adopted[k]);
  }
  return r;
}

namespace {

// Seeded per-class sample of the core set, ascending ids.
std::vector<std::uint32_t> training_sample(std::span<const std::uint32_t> core, std::span<const std::uint8_t> labels,
                                           std::size_t cap, std::uint64_t seed) {
  if (cap == 0) return {core.begin(), core.end()};
  std::vector<std::vector<std::uint32_t>> by_class(256);
  for (std::uint32_t id : core) by_class[labels[id]].push_back(id);
  Rng rng(seed ^ 0x5eedc0de5eedc0deULL);
  std::vector<std::uint32_t> out;
  for (auto& ids : by_class) {
    if (ids.size() > cap) {
      for (std::size_t k = 0; k < cap; ++k) std::swap(ids[k], ids[k + rng.below(ids.size() - k)]);
      ids.resize(cap);
    }
    out.insert(out.end(), ids.begin(), ids.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

RefinementResult refine_labels(const PointCloud& cloud, const SpatialIndex& index,
                               std::vector<std::uint8_t> back_projected, std::size_t num_classes,
                               const RefinementConfig& config) {
  config.validate();
  if (back_projected.size() != cloud.size()) throw InvalidArgument("refine: label count does not match cloud");
  RefinementResult r;
  r.num_classes = num_classes;
  r.back_projected = std::move(back_projected);
  r.smoothed = knn_smooth(r.back_projected, index, config.k_vote, config.workers);
  const auto core = core_set(r.back_projected, r.smoothed);
  const auto suspects = suspect_set(r.back_projected, r.smoothed, config.relabel_void);
  r.core_size = core.size();
  r.suspects = suspects.size();
  r.final_labels = r.smoothed;

  std::vector<std::uint8_t> present(num_classes, 0);
  for (std::uint32_t id : core) {
    if (r.back_projected[id] >= num_classes) throw DataError("refine: label exceeds the class count");
    present[r.back_projected[id]] = 1;
  }
  const auto n_present = std::count(present.begin(), present.end(), 1);
  if (suspects.empty()) {
    r.forest_note = "no suspect points";
    return r;
  }
  if (n_present < 2) {
    r.forest_note = "core set holds " + std::to_string(n_present) + " class(es)";
    return r;
  }
  const auto training = training_sample(core, r.back_projected, config.core_sample_per_class, config.forest.seed);
  r.training_size = training.size();
  std::vector<std::uint32_t> needed(training);
  needed.insert(needed.end(), suspects.begin(), suspects.end());
  std::sort(needed.begin(), needed.end());
  const auto feats = point_features(cloud, index, config.scales, config.workers, needed);
  const FeatureRows rows{feats, point_feature_dim(config.scales.size())};
  ForestOptions fo = config.forest;
  fo.workers = config.workers;
  const RandomForest forest = rf_train(rows, training, r.back_projected, num_classes, fo);
  auto rel = rf_relabel(forest, suspects, rows, r.smoothed, config.tau, config.workers);
  r.final_labels = std::move(rel.labels);
  r.forest_trained = true;
  r.forest_adoptions = rel.adoptions;
  r.forest_changes = rel.changed;
  return r;
}

RefinementResult refine_labels(const PointCloud& cloud, const ProjectionIndex& projection, const LabelMask& mask,
                               std::size_t num_classes, const RefinementConfig& config) {
  const SpatialIndex index(cloud);
  return refine_labels(cloud, index, back_project(projection, mask), num_classes, config);
}

std::string refinement_report_json(const RefinementResult& r) {
  using nlohmann::ordered_json;
  const std::size_t nc = std::max<std::size_t>(r.num_classes, 1);
  std::vector<std::size_t> left(nc, 0), entered(nc, 0), bp(nc, 0), fin(nc, 0);
  std::size_t smoothing_changes = 0, total_changes = 0;
  for (std::size_t i = 0; i < r.back_projected.size(); ++i) {
    const auto a = r.back_projected[i], s = r.smoothed[i], f = r.final_labels[i];
    if (a < nc) ++bp[a];
    if (f < nc) ++fin[f];
    if (a != s) ++smoothing_changes;
    if (a != f) {
      ++total_changes;
      if (a < nc) ++left[a];
      if (f < nc) ++entered[f];
    }
  }
  ordered_json j;
  j["points"] = r.back_projected.size();
  j["void_points"] = r.back_projected.empty() ? 0 : bp[0];
  j["smoothing_changes"] = smoothing_changes;
  j["core_set_size"] = r.core_size;
  j["training_size"] = r.training_size;
  j["suspect_set_size"] = r.suspects;
  j["forest_trained"] = r.forest_trained;
  if (!r.forest_note.empty()) j["forest_note"] = r.forest_note;
  j["forest_adoptions"] = r.forest_adoptions;
  j["forest_changes"] = r.forest_changes;
  j["total_changes"] = total_changes;
  ordered_json per = ordered_json::array();
  for (std::size_t c = 0; c < nc; ++c)
    per.push_back({{"class", c}, {"back_projected", bp[c]}, {"final", fin[c]}, {"changed_from", left[c]},
                   {"changed_to", entered[c]}});
  j["per_class"] = per;
  return j.dump(2);
}

}  // namespace lidarsphere
