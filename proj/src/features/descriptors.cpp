#include "features/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "features/sym_eigen3.hpp"
#include "projection/spherical.hpp"

namespace lidarsphere {

std::array<std::array<double, 3>, 3> covariance(std::span<const Vec3> points) {
  std::array<std::array<double, 3>, 3> c{};
  const std::size_t n = points.size();
  if (n < 2) return c;
  Vec3 mean{0, 0, 0};
  for (const auto& p : points)
    for (int a = 0; a < 3; ++a) mean[a] += p[a];
  for (double& m : mean) m /= static_cast<double>(n);
  for (const auto& p : points) {
    const double d[3] = {p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]};
    for (int r = 0; r < 3; ++r)
      for (int s = r; s < 3; ++s) c[r][s] += d[r] * d[s];
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (int r = 0; r < 3; ++r)
    for (int s = r; s < 3; ++s) c[s][r] = c[r][s] = c[r][s] * inv;
  return c;
}

void fill_shape_descriptors(EigenFeatures& f) {
  auto& l = f.eigenvalues;
  const double sum = l[0] + l[1] + l[2];
  if (!(l[2] > 0.0) || !(sum > 0.0)) {
    f.curvature = f.anisotropy = f.planarity = 0.0;
    return;
  }
  f.curvature = std::clamp(l[0] / sum, 0.0, 1.0 / 3.0);
  f.anisotropy = std::clamp((l[2] - l[1]) / l[2], 0.0, 1.0);
  f.planarity = std::clamp((l[1] - l[0]) / l[2], 0.0, 1.0);
}

namespace {

Vec3 view_vector(const Vec3& p, const Vec3& origin) {
  Vec3 v{origin[0] - p[0], origin[1] - p[1], origin[2] - p[2]};
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(n > 0.0)) return {0.0, 0.0, 1.0};
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

EigenFeatures describe_neighborhood(const Vec3& center, std::span<const Vec3> neighbors, const Vec3& scanner_origin,
                                    std::size_t min_neighbors) {
  EigenFeatures f;
  f.neighbors = static_cast<std::uint32_t>(neighbors.size());
  const Vec3 view = view_vector(center, scanner_origin);
  if (neighbors.size() < min_neighbors) {
    f.normal = view;
    return f;
  }
  std::vector<Vec3> pts;
  pts.reserve(neighbors.size() + 1);
  pts.push_back(center);
  pts.insert(pts.end(), neighbors.begin(), neighbors.end());
  const auto eig = sym_eigen3(covariance(pts));
  if (!(eig.values[2] > 0.0)) {
    f.normal = view;
    return f;
  }
  for (int k = 0; k < 3; ++k) f.eigenvalues[k] = std::max(eig.values[k], 0.0);
  fill_shape_descriptors(f);
  f.normal = eig.vectors[0];
  if (f.normal[0] * view[0] + f.normal[1] * view[1] + f.normal[2] * view[2] < 0.0)
    for (double& c : f.normal) c = -c;
  f.degenerate = false;
  return f;
}

AngularBatches azimuth_elevation_batches(const PointCloud& cloud, double tile_deg) {
  if (!(tile_deg > 0.0)) throw InvalidArgument("batch tile size must be positive");
  const double tile = tile_deg * std::numbers::pi / 180.0;
  const auto rows = static_cast<std::size_t>(std::ceil(std::numbers::pi / tile)) + 1;
  const auto cols = static_cast<std::size_t>(std::ceil(2.0 * std::numbers::pi / tile)) + 1;
  std::vector<std::size_t> tile_of(cloud.size(), 0);
  std::vector<std::size_t> counts(rows * cols + 1, 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    std::size_t t = 0;
    if (p.x != 0.0f || p.y != 0.0f || p.z != 0.0f) {
      const Angles a = compute_angles(p);
      t = std::min(rows - 1, static_cast<std::size_t>(a.theta / tile)) * cols +
          std::min(cols - 1, static_cast<std::size_t>(a.phi / tile));
    }
    tile_of[i] = t;
    ++counts[t + 1];
  }
  AngularBatches b;
  b.offsets.assign(counts.size(), 0);
  for (std::size_t t = 1; t < counts.size(); ++t) b.offsets[t] = b.offsets[t - 1] + counts[t];
  std::vector<std::size_t> cursor(b.offsets.begin(), b.offsets.end() - 1);
  b.order.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) b.order[cursor[tile_of[i]]++] = static_cast<std::uint32_t>(i);
  // Drop empty tiles from the boundary list.
  b.offsets.erase(std::unique(b.offsets.begin(), b.offsets.end()), b.offsets.end());
  return b;
}

namespace {

template <typename RadiusOf>
std::vector<EigenFeatures> run_descriptors(const PointCloud& cloud, const SpatialIndex& index,
                                           const DescriptorOptions& options, std::span<const std::uint32_t> subset,
                                           RadiusOf&& radius_of) {
  if (index.size() != cloud.size()) throw InvalidArgument("eigen_descriptors: index does not match cloud");
  std::vector<EigenFeatures> out(cloud.size());
  std::vector<std::uint8_t> wanted;
  if (!subset.empty()) {
    wanted.assign(cloud.size(), 0);
    for (std::uint32_t id : subset) {
      if (id >= cloud.size()) throw InvalidArgument("eigen_descriptors: subset id out of range");
      wanted[id] = 1;
    }
  }
  const AngularBatches batches = azimuth_elevation_batches(cloud, options.batch_tile_deg);
  const std::size_t n_tiles = batches.offsets.empty() ? 0 : batches.offsets.size() - 1;
  const Vec3 origin = cloud.meta.scanner_origin;
  parallel_for_chunks(n_tiles, 1, options.workers, [&](std::size_t tb, std::size_t te) {
    std::vector<Vec3> nbr;
    for (std::size_t t = tb; t < te; ++t) {
      for (std::size_t k = batches.offsets[t]; k < batches.offsets[t + 1]; ++k) {
        const std::uint32_t id = batches.order[k];
        if (!wanted.empty() && !wanted[id]) continue;
        const double r = radius_of(id);
        const auto found = index.radius(id, r);
        nbr.clear();
        for (const auto& n : found) {
          const auto& q = index.position(n.id);
          nbr.push_back({q[0], q[1], q[2]});
        }
        out[id] = describe_neighborhood(position(cloud.points[id]), nbr, origin);
      }
    }
  });
  return out;
}

}  // namespace

std::vector<EigenFeatures> eigen_descriptors(const PointCloud& cloud, const SpatialIndex& index,
                                             const DescriptorOptions& options, std::span<const std::uint32_t> subset) {
  options.radius.validate();
  const std::size_t k = std::min(options.radius.k_ref, cloud.size() > 0 ? cloud.size() - 1 : 0);
  return run_descriptors(cloud, index, options, subset, [&](std::uint32_t id) {
    if (k == 0) return options.radius.r_min;
    const auto nn = index.knn(id, k);
    return adaptive_radius_from_distance(nn.back().distance, options.radius);
  });
}

std::vector<EigenFeatures> eigen_descriptors_fixed(const PointCloud& cloud, const SpatialIndex& index, double radius,
                                                   const DescriptorOptions& options,
                                                   std::span<const std::uint32_t> subset) {
  if (!(radius > 0.0)) throw InvalidArgument("eigen_descriptors_fixed: radius must be positive");
  return run_descriptors(cloud, index, options, subset, [&](std::uint32_t) { return radius; });
}

}  // namespace lidarsphere
