#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "common/image.hpp"
#include "pointcloud/point_cloud.hpp"

namespace lidarsphere {

/// Equirectangular angular grid. Zenith theta runs down the rows, azimuth phi
/// across the columns; both intervals are half-open [min, max).
class GridSpec {
 public:
  GridSpec() = default;
  /// Angles in radians. Throws InvalidArgument on a non-positive step, an
  /// empty span or non-finite input.
  GridSpec(double theta_min, double theta_max, double phi_min, double phi_max, double d_theta, double d_phi);

  static GridSpec from_degrees(double resolution_deg, double theta_min_deg, double theta_max_deg,
                               double phi_min_deg = 0.0, double phi_max_deg = 360.0);
  /// 0.25 deg, zenith [0, 135), azimuth [0, 360): 540 x 1440.
  static GridSpec cbl();

  double theta_min() const noexcept { return theta_min_; }
  double theta_max() const noexcept { return theta_max_; }
  double phi_min() const noexcept { return phi_min_; }
  double phi_max() const noexcept { return phi_max_; }
  double d_theta() const noexcept { return d_theta_; }
  double d_phi() const noexcept { return d_phi_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixels() const noexcept { return height_ * width_; }

  /// Zenith/azimuth of the center of pixel (row, col).
  double row_center(std::size_t row) const { return theta_min_ + (static_cast<double>(row) + 0.5) * d_theta_; }
  double col_center(std::size_t col) const { return phi_min_ + (static_cast<double>(col) + 0.5) * d_phi_; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  double theta_min_ = 0.0, theta_max_ = 0.0, phi_min_ = 0.0, phi_max_ = 0.0;
  double d_theta_ = 1.0, d_phi_ = 1.0;
  std::size_t height_ = 0, width_ = 0;
};

struct Angles {
  double theta = 0.0;  // zenith, [0, pi]
  double phi = 0.0;    // azimuth, [0, 2 pi)
};

/// Throws InvalidArgument for a point at the origin.
Angles compute_angles(double x, double y, double z);
inline Angles compute_angles(const Point3& p) { return compute_angles(p.x, p.y, p.z); }

struct PixelCoord {
  std::int32_t row = -1;
  std::int32_t col = -1;
  bool in_grid() const noexcept { return row >= 0; }
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Pixel of a direction, or an out-of-grid coord.
PixelCoord pixel_of(const GridSpec& grid, const Angles& a);

/// Bidirectional point <-> pixel mapping. Each pixel's point list is sorted by
/// ascending range, then by point id.
class ProjectionIndex {
 public:
  ProjectionIndex() = default;
  ProjectionIndex(GridSpec grid, std::vector<PixelCoord> pixel_of_point, std::vector<double> range);

  const GridSpec& grid() const noexcept { return grid_; }
  std::size_t height() const noexcept { return grid_.height(); }
  std::size_t width() const noexcept { return grid_.width(); }
  std::size_t point_count() const noexcept { return pixel_of_point_.size(); }
  std::size_t in_grid_count() const noexcept { return ids_.size(); }

  const PixelCoord& pixel(std::size_t point) const { return pixel_of_point_[point]; }
  double range(std::size_t point) const { return range_[point]; }
  const std::vector<PixelCoord>& pixels() const noexcept { return pixel_of_point_; }
  const std::vector<double>& ranges() const noexcept { return range_; }

  /// Points falling in pixel (row, col), nearest first.
  std::span<const std::uint32_t> points_in(std::size_t row, std::size_t col) const;
  std::span<const std::uint32_t> points_in(std::size_t flat) const;
  std::size_t count(std::size_t flat) const { return offsets_[flat + 1] - offsets_[flat]; }

  friend bool operator==(const ProjectionIndex& a, const ProjectionIndex& b) {
    return a.grid_ == b.grid_ && a.pixel_of_point_ == b.pixel_of_point_ && a.range_ == b.range_ &&
           a.offsets_ == b.offsets_ && a.ids_ == b.ids_;
  }

 private:
  GridSpec grid_;
  std::vector<PixelCoord> pixel_of_point_;
  std::vector<double> range_;
  std::vector<std::size_t> offsets_;  // CSR offsets, H*W + 1 entries
  std::vector<std::uint32_t> ids_;
};

/// Projects every point. Points at the origin and outside the grid get an
/// out-of-grid marker. Deterministic for any worker count.
ProjectionIndex project(const PointCloud& cloud, const GridSpec& grid, unsigned workers = 0);

struct DensityMap {
  Image<std::uint32_t> counts;
  std::vector<std::size_t> histogram;  // histogram[c] = number of pixels holding c points

  std::size_t mode() const;
  std::size_t pixels_above(std::size_t count) const;
};

DensityMap density_map(const ProjectionIndex& index);

enum class Reducer { kNearest, kMean, kMax };

/// Per-pixel reduction of per-point values; empty pixels are 0.
RealMap rasterize_channel(const ProjectionIndex& index, std::span<const double> values,
                          Reducer reducer = Reducer::kNearest);
/// Label raster taking each pixel's nearest occupant.
LabelMask rasterize_labels(const ProjectionIndex& index, std::span<const std::uint8_t> labels);
/// 1 where a pixel holds at least one point.
BoolMask occupancy(const ProjectionIndex& index);

/// Each in-grid point takes its pixel's label; out-of-grid points get Void.
std::vector<std::uint8_t> back_project(const ProjectionIndex& index, const LabelMask& mask);

struct VirtualSphereSpec {
  double resolution_deg = 1.0;
  double radius = 1.0;
  double zenith_min_deg = 0.0;
  double zenith_max_deg = 135.0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t point_count() const { return rows() * cols(); }
};

/// Synthetic uniformly sampled sphere colored from `colors` (a map over `grid`)
/// by nearest-pixel lookup. Point count depends only on spec.
PointCloud virtual_sphere(const Image<Rgb>& colors, const GridSpec& grid, const VirtualSphereSpec& spec);

}  // namespace lidarsphere
