#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "common/image.hpp"
#include "pointcloud/point_cloud.hpp"

namespace lidarsphere {

struct Channel {
  std::string name;
  RealMap values;
};

/// H x W x C named channels over the spherical grid plus the mask of pixels
/// that hold a return.
class FeatureCube {
 public:
  FeatureCube() = default;
  FeatureCube(std::size_t height, std::size_t width, BoolMask valid);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channel_count() const noexcept { return channels_.size(); }
  const std::vector<Channel>& channels() const noexcept { return channels_; }
  const Channel& channel(std::size_t c) const { return channels_.at(c); }
  const RealMap& operator[](std::size_t c) const { return channels_.at(c).values; }
  /// Throws InvalidArgument for an unknown name.
  const RealMap& channel(const std::string& name) const;
  std::vector<std::string> names() const;

  const BoolMask& valid() const noexcept { return valid_; }
  std::size_t valid_count() const;

  /// Throws InvalidArgument on duplicate name or shape mismatch.
  void add(std::string name, RealMap values);

  /// Per-pixel feature vector (channel order).
  void pixel(std::size_t flat, std::span<double> out) const;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Channel> channels_;
  BoolMask valid_;
};

/// Concatenates channels in argument order. Name collisions and shape
/// mismatches throw InvalidArgument. The valid mask is the intersection.
FeatureCube stack(const std::vector<const FeatureCube*>& parts);

struct StretchPercentiles {
  double low = 1.0;   // percent
  double high = 99.0;
};

/// Linear-interpolated percentile (0..100) of an ascending-sorted sample.
double percentile_sorted(std::span<const double> sorted, double pct);

/// Clips valid pixels to the [low, high] percentiles of the valid values, then
/// maps affinely onto [0.01, 1]. Zero dynamic range maps to 0.01. Void pixels
/// are 0.
RealMap histogram_stretch(const RealMap& map, const BoolMask& valid, const StretchPercentiles& pct);

/// Inverted height: H = Z - Z_min, negated and normalized to [0.01, 1] so the
/// lowest return is brightest. A flat map (every valid pixel at Z_min) is 1.
RealMap inverted_height(const RealMap& z, const BoolMask& valid);

/// Channels "intensity", "range", "z_inv". Throws DataError if no pixel is valid.
FeatureCube preprocess_basic(const RealMap& intensity, const RealMap& range, const RealMap& z, const BoolMask& valid,
                             const StretchPercentiles& pct = {});

/// Standard hexcone HSV -> RGB, all components in [0, 1].
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

/// Normal pseudo-color: hue = azimuth / 2pi, value = (elevation + pi/2) / pi,
/// saturation 0.6. Channels "normal_r", "normal_g", "normal_b".
FeatureCube normals_to_pseudo_rgb(const RealMap& nx, const RealMap& ny, const RealMap& nz, const BoolMask& valid);
std::array<double, 3> normal_color(const Vec3& n);

enum class CorrelationScope { kValidOnly, kAll };

/// Pearson correlation between channels (row-major C x C). Rows/columns of a
/// zero-variance channel are NaN ("undefined"), except its diagonal.
std::vector<double> correlation_matrix(const FeatureCube& cube, CorrelationScope scope = CorrelationScope::kValidOnly);

/// FCUB container: "FCUB", u16 version, u32 H/W/C, length-prefixed names, then
/// C row-major float32 planes. The valid mask is not stored; on load a pixel is
/// valid when any channel is nonzero.
void save_fcub(const FeatureCube& cube, const std::filesystem::path& path);
FeatureCube load_fcub(const std::filesystem::path& path);

}  // namespace lidarsphere
