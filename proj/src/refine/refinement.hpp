#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common/image.hpp"
#include "pointcloud/point_cloud.hpp"
#include "pointcloud/spatial_index.hpp"
#include "projection/spherical.hpp"
#include "refine/forest.hpp"

namespace lidarsphere {

struct RefinementConfig {
  std::size_t k_vote = 9;
  double tau = 0.8;
  ForestOptions forest;
  std::vector<double> scales{0.05, 0.15, 0.30};
  /// Let the forest relabel Void points too.
  bool relabel_void = false;
  /// Core points per class the forest may draw from (seeded sample); 0 = all.
  std::size_t core_sample_per_class = 20000;
  unsigned workers = 0;

  /// Throws InvalidArgument for k_vote == 0, tau outside (0, 1] or bad scales.
  void validate() const;
};

/// Simultaneous majority vote over classes 1..C among the k nearest neighbors
/// (the point itself excluded), using the input labels only. Ties go to the
/// larger summed inverse distance, then the smaller class id. Void points stay
/// Void; a point with no labeled neighbor keeps its label.
std::vector<std::uint8_t> knn_smooth(std::span<const std::uint8_t> labels, const SpatialIndex& index,
                                     std::size_t k_vote, unsigned workers = 0);

/// Ids where the back-projected and smoothed labels agree and are not Void.
std::vector<std::uint32_t> core_set(std::span<const std::uint8_t> y, std::span<const std::uint8_t> y_hat);

/// Non-Void ids outside the core set (and Void ids when `include_void`).
std::vector<std::uint32_t> suspect_set(std::span<const std::uint8_t> y, std::span<const std::uint8_t> y_hat,
                                       bool include_void = false);

/// Per-point vectors: height above the lowest point, range from the scanner,
/// intensity, normal (adaptive radius), then (curvature, anisotropy,
/// planarity) at each fixed radius in `scales`. Row-major, 6 + 3 |scales| wide.
/// A nonempty `subset` limits the neighborhood work to those ids; the normal
/// and shape entries of other rows stay zero.
std::vector<double> point_features(const PointCloud& cloud, const SpatialIndex& index,
                                   std::span<const double> scales, unsigned workers = 0,
                                   std::span<const std::uint32_t> subset = {});
inline std::size_t point_feature_dim(std::size_t n_scales) { return 6 + 3 * n_scales; }

/// Forest on the rows in `core` with labels from `labels`. Throws DataError if
/// the core set has fewer than two classes.
RandomForest rf_train(const FeatureRows& features, std::span<const std::uint32_t> core,
                      std::span<const std::uint8_t> labels, std::size_t num_classes, const ForestOptions& options);

struct RelabelResult {
  std::vector<std::uint8_t> labels;
  std::size_t adoptions = 0;  // suspects whose forest confidence reached tau
  std::size_t changed = 0;    // adoptions that differ from the smoothed label
};

/// Suspects whose top forest probability is >= tau take the forest label; all
/// other points keep y_hat.
RelabelResult rf_relabel(const RandomForest& forest, std::span<const std::uint32_t> suspects,
                         const FeatureRows& features, std::span<const std::uint8_t> y_hat, double tau,
                         unsigned workers = 0);

struct RefinementResult {
  std::vector<std::uint8_t> back_projected;
  std::vector<std::uint8_t> smoothed;
  std::vector<std::uint8_t> final_labels;
  std::size_t core_size = 0;
  std::size_t training_size = 0;
  std::size_t suspects = 0;
  bool forest_trained = false;
  std::string forest_note;
  std::size_t forest_adoptions = 0;
  std::size_t forest_changes = 0;
  std::size_t num_classes = 0;
};

/// Back-projection, smoothing, core extraction, forest training and relabeling
/// in that order. Training is skipped (and noted) when there are no suspects or
/// the core set holds a single class.
RefinementResult refine_labels(const PointCloud& cloud, const SpatialIndex& index,
                               std::vector<std::uint8_t> back_projected, std::size_t num_classes,
                               const RefinementConfig& config);
RefinementResult refine_labels(const PointCloud& cloud, const ProjectionIndex& projection, const LabelMask& mask,
                               std::size_t num_classes, const RefinementConfig& config);

/// Summary counts: stage totals plus, per class, how many points left and
/// entered it between back-projection and the final labels.
std::string refinement_report_json(const RefinementResult& r);

}  // namespace lidarsphere
