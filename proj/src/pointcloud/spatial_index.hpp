#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "pointcloud/point_cloud.hpp"

namespace lidarsphere {

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Balanced k-d tree over the positions of a cloud. Immutable after
/// construction; queries are safe from any number of threads.
///
/// All result lists are ordered by ascending distance with the point id as the
/// tiebreaker, so they are reproducible and comparable with a brute-force sort.
class SpatialIndex {
 public:
  static constexpr std::uint32_t kNoExclude = std::numeric_limits<std::uint32_t>::max();

  explicit SpatialIndex(const PointCloud& cloud);
  explicit SpatialIndex(std::vector<std::array<float, 3>> positions);

  std::size_t size() const noexcept { return positions_.size(); }
  const std::array<float, 3>& position(std::size_t id) const { return positions_[id]; }

  /// min(k, N-1) nearest neighbors of point `id`, the point itself excluded.
  std::vector<Neighbor> knn(std::size_t id, std::size_t k) const;
  /// k nearest neighbors of an arbitrary location; `exclude` is skipped if set.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k, std::uint32_t exclude = kNoExclude) const;

  /// All points within `radius` (inclusive) of point `id`, itself excluded.
  std::vector<Neighbor> radius(std::size_t id, double radius) const;
  std::vector<Neighbor> radius(const Vec3& query, double radius, std::uint32_t exclude = kNoExclude) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    float split = 0.0f;
    std::uint8_t axis = 0;
  };

  void build();
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end);
  void check_id(std::size_t id) const;

  std::vector<std::array<float, 3>> positions_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct AdaptiveRadiusSpec {
  double lambda = 1.5;
  std::size_t k_ref = 10;
  double r_min = 0.02;
  double r_max = 0.3;

  void validate() const;
};

/// clamp(lambda * d_k, r_min, r_max).
double adaptive_radius_from_distance(double d_k, const AdaptiveRadiusSpec& spec);

/// Adaptive radius at a point, d_k being the distance to its k_ref-th neighbor.
double adaptive_radius(const SpatialIndex& index, std::size_t point_id, const AdaptiveRadiusSpec& spec);

std::vector<Neighbor> neighbors_in_radius(const SpatialIndex& index, std::size_t point_id, double radius);

}  // namespace lidarsphere
