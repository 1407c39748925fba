#include "pointcloud/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace lidarsphere {

std::vector<ClassInfo> default_class_schema() {
  return {
      {0, "Void", {0, 0, 0}},
      {1, "Ground & Water", {139, 90, 43}},
      {2, "Stem", {230, 25, 75}},
      {3, "Canopy", {60, 180, 75}},
      {4, "Root", {255, 225, 25}},
      {5, "Object", {0, 130, 200}},
  };
}

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw DataError("point " + std::to_string(i) + " has non-finite coordinates");
    if (has_intensity && !(p.intensity >= 0.0f))
      throw DataError("point " + std::to_string(i) + " has negative or NaN intensity");
  }
  if (!colors.empty() && colors.size() != points.size())
    throw DataError("color table length does not match point count");
}

PointCloud recenter(const PointCloud& cloud, const Vec3& center) {
  for (double c : center)
    if (!std::isfinite(c)) throw InvalidArgument("recenter: center must be finite");
  PointCloud out = cloud;
  for (auto& p : out.points) {
    p.x = static_cast<float>(p.x - center[0]);
    p.y = static_cast<float>(p.y - center[1]);
    p.z = static_cast<float>(p.z - center[2]);
  }
  out.meta.scanner_origin = {0.0, 0.0, 0.0};
  return out;
}

Vec3 mean_position(const PointCloud& cloud) {
  Vec3 m{0, 0, 0};
  if (cloud.empty()) return m;
  for (const auto& p : cloud.points) {
    m[0] += p.x;
    m[1] += p.y;
    m[2] += p.z;
  }
  for (double& v : m) v /= static_cast<double>(cloud.size());
  return m;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) + 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) + 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

// Returns the ids kept by voxel downsampling of `ids`; one point per voxel,
// the one closest to the centroid of the voxel's points (smallest id on ties).
std::vector<std::size_t> voxel_downsample(const PointCloud& cloud, const std::vector<std::size_t>& ids,
                                          double voxel) {
  struct Cell {
    double sx = 0, sy = 0, sz = 0;
    std::vector<std::size_t> members;
  };
  std::unordered_map<VoxelKey, Cell, VoxelKeyHash> cells;
  std::vector<VoxelKey> order;
  for (std::size_t id : ids) {
    const auto& p = cloud.points[id];
    VoxelKey key{static_cast<std::int64_t>(std::floor(p.x / voxel)),
                 static_cast<std::int64_t>(std::floor(p.y / voxel)),
                 static_cast<std::int64_t>(std::floor(p.z / voxel))};
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.sx += p.x;
    it->second.sy += p.y;
    it->second.sz += p.z;
    it->second.members.push_back(id);
  }
  std::vector<std::size_t> kept;
  kept.reserve(order.size());
  for (const auto& key : order) {
    const Cell& c = cells.at(key);
    const double n = static_cast<double>(c.members.size());
    const double cx = c.sx / n, cy = c.sy / n, cz = c.sz / n;
    std::size_t best = c.members.front();
    double best_d = INFINITY;
    for (std::size_t id : c.members) {
      const auto& p = cloud.points[id];
      const double d = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy) + (p.z - cz) * (p.z - cz);
      if (d < best_d || (d == best_d && id < best)) {
        best_d = d;
        best = id;
      }
    }
    kept.push_back(best);
  }
  return kept;
}

// Seeded partial Fisher-Yates: the first `count` entries of a shuffle of ids.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> ids, std::size_t count,
                                                    Rng& rng) {
  count = std::min(count, ids.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  return ids;
}

}  // namespace

PointCloud hybrid_subsample(const PointCloud& cloud, const SubsampleOptions& options) {
  if (options.target == 0) throw InvalidArgument("hybrid_subsample: target must be positive");
  if (!cloud.has_labels) throw InvalidArgument("hybrid_subsample: cloud must be labeled");
  if (options.voxel <= 0.0) throw InvalidArgument("hybrid_subsample: voxel size must be positive");
  if (options.rare_frac < 0.0 || options.rare_frac > 1.0)
    throw InvalidArgument("hybrid_subsample: rare_frac must lie in [0, 1]");
  const std::size_t n = cloud.size();
  if (options.target >= n) throw InvalidArgument("hybrid_subsample: target must be below the point count");

  std::map<std::uint8_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[cloud.points[i].label].push_back(i);

  std::vector<std::uint8_t> rare;
  for (const auto& [label, ids] : by_class) {
    if (static_cast<double>(ids.size()) / static_cast<double>(n) <= options.rare_threshold) rare.push_back(label);
  }

  Rng rng(options.seed);
  std::vector<std::size_t> kept;
  std::vector<std::size_t> common;
  if (!rare.empty()) {
    const auto allocation = static_cast<std::size_t>(std::llround(options.rare_frac * static_cast<double>(options.target)));
    const std::size_t share = std::max<std::size_t>(1, allocation / rare.size());
    for (std::uint8_t label : rare) {
      auto picked = sample_without_replacement(by_class[label], share, rng);
      kept.insert(kept.end(), picked.begin(), picked.end());
    }
  }
  for (const auto& [label, ids] : by_class) {
    if (std::find(rare.begin(), rare.end(), label) == rare.end()) common.insert(common.end(), ids.begin(), ids.end());
  }
  std::sort(common.begin(), common.end());
  auto voxels = voxel_downsample(cloud, common, options.voxel);
  const std::size_t budget = options.target > kept.size() ? options.target - kept.size() : 0;
  if (voxels.size() > budget) {
    std::sort(voxels.begin(), voxels.end());
    voxels = sample_without_replacement(std::move(voxels), budget, rng);
  }
  kept.insert(kept.end(), voxels.begin(), voxels.end());
  std::sort(kept.begin(), kept.end());

  PointCloud out;
  out.has_intensity = cloud.has_intensity;
  out.has_labels = cloud.has_labels;
  out.meta = cloud.meta;
  out.points.reserve(kept.size());
  for (std::size_t id : kept) {
    out.points.push_back(cloud.points[id]);
    if (cloud.has_colors()) out.colors.push_back(cloud.colors[id]);
  }
  return out;
}

}  // namespace lidarsphere
