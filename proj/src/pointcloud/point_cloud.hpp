#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lidarsphere {

inline constexpr std::uint8_t kVoid = 0;

struct Point3 {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;
  std::uint8_t label = kVoid;

  friend bool operator==(const Point3&, const Point3&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;
using Vec3 = std::array<double, 3>;

struct ClassInfo {
  std::uint8_t id = 0;
  std::string name;
  Rgb color{0, 0, 0};
};

/// The five mangrove classes plus Void (id 0).
std::vector<ClassInfo> default_class_schema();

struct ScanMeta {
  Vec3 scanner_origin{0.0, 0.0, 0.0};
  std::vector<ClassInfo> class_names = default_class_schema();
  std::string source_id;
};

/// Ordered points plus per-cloud flags saying which optional attributes exist.
/// `colors` is either empty or one entry per point.
struct PointCloud {
  std::vector<Point3> points;
  bool has_intensity = false;
  bool has_labels = false;
  std::vector<Rgb> colors;
  ScanMeta meta;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_colors() const noexcept { return !colors.empty(); }

  /// Throws DataError on non-finite coordinates, negative intensity or a
  /// color table whose length does not match the point count.
  void validate() const;
};

inline Vec3 position(const Point3& p) { return {p.x, p.y, p.z}; }

/// Translates every point by -center; the scanner origin becomes zero.
PointCloud recenter(const PointCloud& cloud, const Vec3& center);

Vec3 mean_position(const PointCloud& cloud);

struct SubsampleOptions {
  std::size_t target = 0;
  double rare_frac = 0.05;
  double voxel = 0.01;
  double rare_threshold = 0.01;  // class frequency at or below this is "rare"
  std::uint64_t seed = 42;
};

/// Two-stage subsampling: rare classes keep a seeded sample from their share of
/// the target, everything else is voxel-downsampled keeping the point nearest
/// each voxel's centroid. Output preserves input order.
PointCloud hybrid_subsample(const PointCloud& cloud, const SubsampleOptions& options);

}  // namespace lidarsphere
