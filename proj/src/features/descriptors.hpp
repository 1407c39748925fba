#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pointcloud/point_cloud.hpp"
#include "pointcloud/spatial_index.hpp"

namespace lidarsphere {

/// Eigenvalue-based shape descriptors of one point's neighborhood.
///   curvature  = l1 / (l1 + l2 + l3)
///   anisotropy = (l3 - l2) / l3
///   planarity  = (l2 - l1) / l3
/// with l1 <= l2 <= l3 the covariance eigenvalues.
struct EigenFeatures {
  std::array<double, 3> eigenvalues{0, 0, 0};
  double curvature = 0.0;
  double anisotropy = 0.0;
  double planarity = 0.0;
  Vec3 normal{0, 0, 1};
  std::uint32_t neighbors = 0;
  bool degenerate = true;
};

/// Sample covariance (1/(N-1) normalization) of a set of positions.
std::array<std::array<double, 3>, 3> covariance(std::span<const Vec3> points);

/// Descriptors from the eigenvalues only (normal left untouched).
void fill_shape_descriptors(EigenFeatures& f);

/// Descriptors of the neighborhood `points` around `center`. Fewer than
/// `min_neighbors` neighbors (excluding the center) yields the degenerate
/// fallback: zero descriptors and a normal pointing at the scanner.
EigenFeatures describe_neighborhood(const Vec3& center, std::span<const Vec3> neighbors, const Vec3& scanner_origin,
                                    std::size_t min_neighbors = 3);

struct DescriptorOptions {
  AdaptiveRadiusSpec radius;
  /// Angular tile edge (degrees) for batching points in azimuth-elevation order.
  double batch_tile_deg = 10.0;
  unsigned workers = 0;
};

/// Per-point descriptors using the adaptive radius at each point. A nonempty
/// `subset` restricts the work to those ids; other entries stay degenerate.
std::vector<EigenFeatures> eigen_descriptors(const PointCloud& cloud, const SpatialIndex& index,
                                             const DescriptorOptions& options,
                                             std::span<const std::uint32_t> subset = {});

/// Per-point descriptors at one fixed radius.
std::vector<EigenFeatures> eigen_descriptors_fixed(const PointCloud& cloud, const SpatialIndex& index, double radius,
                                                   const DescriptorOptions& options,
                                                   std::span<const std::uint32_t> subset = {});

/// Point ids grouped by azimuth-elevation tile (row-major over tiles, ids
/// ascending within a tile), plus the tile boundaries.
struct AngularBatches {
  std::vector<std::uint32_t> order;
  std::vector<std::size_t> offsets;
};
AngularBatches azimuth_elevation_batches(const PointCloud& cloud, double tile_deg);

}  // namespace lidarsphere
