#include "projection/spherical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "common/error.hpp"
#include "common/parallel.hpp"

namespace lidarsphere {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t cell_count(double span, double step) {
  return static_cast<std::size_t>(std::llround(span / step));
}

}  // namespace

GridSpec::GridSpec(double theta_min, double theta_max, double phi_min, double phi_max, double d_theta, double d_phi)
    : theta_min_(theta_min), theta_max_(theta_max), phi_min_(phi_min), phi_max_(phi_max), d_theta_(d_theta),
      d_phi_(d_phi) {
  for (double v : {theta_min, theta_max, phi_min, phi_max, d_theta, d_phi})
    if (!std::isfinite(v)) throw InvalidArgument("grid: angles must be finite");
  if (!(d_theta > 0.0) || !(d_phi > 0.0)) throw InvalidArgument("grid: angular steps must be positive");
  if (!(theta_max > theta_min) || !(phi_max > phi_min)) throw InvalidArgument("grid: empty angular span");
  height_ = cell_count(theta_max - theta_min, d_theta);
  width_ = cell_count(phi_max - phi_min, d_phi);
  if (height_ == 0 || width_ == 0) throw InvalidArgument("grid: span smaller than one pixel");
}

GridSpec GridSpec::from_degrees(double res, double tmin, double tmax, double pmin, double pmax) {
  return GridSpec(tmin * kDeg, tmax * kDeg, pmin * kDeg, pmax * kDeg, res * kDeg, res * kDeg);
}

GridSpec GridSpec::cbl() { return from_degrees(0.25, 0.0, 135.0, 0.0, 360.0); }

Angles compute_angles(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (!(r > 0.0)) throw InvalidArgument("compute_angles: point at the scanner origin");
  Angles a;
  a.theta = std::acos(std::clamp(z / r, -1.0, 1.0));
  a.phi = std::fmod(std::atan2(y, x), kTwoPi);
  if (a.phi < 0.0) a.phi += kTwoPi;
  if (a.phi >= kTwoPi) a.phi -= kTwoPi;
  return a;
}

PixelCoord pixel_of(const GridSpec& grid, const Angles& a) {
  if (!(a.theta >= grid.theta_min() && a.theta < grid.theta_max())) return {};
  if (!(a.phi >= grid.phi_min() && a.phi < grid.phi_max())) return {};
  const auto i = static_cast<std::int64_t>(std::floor((a.theta - grid.theta_min()) / grid.d_theta()));
  const auto j = static_cast<std::int64_t>(std::floor((a.phi - grid.phi_min()) / grid.d_phi()));
  if (i < 0 || j < 0 || i >= static_cast<std::int64_t>(grid.height()) || j >= static_cast<std::int64_t>(grid.width()))
    return {};
  return {static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)};
}

ProjectionIndex::ProjectionIndex(GridSpec grid, std::vector<PixelCoord> pixel_of_point, std::vector<double> range)
    : grid_(grid), pixel_of_point_(std::move(pixel_of_point)), range_(std::move(range)) {
  if (pixel_of_point_.size() != range_.size()) throw InvalidArgument("projection index: length mismatch");
  const std::size_t n_pix = grid_.pixels();
  offsets_.assign(n_pix + 1, 0);
  for (const auto& px : pixel_of_point_) {
    if (!px.in_grid()) continue;
    if (static_cast<std::size_t>(px.row) >= grid_.height() || static_cast<std::size_t>(px.col) >= grid_.width())
      throw InvariantError("projection index: pixel outside grid");
    ++offsets_[static_cast<std::size_t>(px.row) * grid_.width() + px.col + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  ids_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t p = 0; p < pixel_of_point_.size(); ++p) {
    const auto& px = pixel_of_point_[p];
    if (!px.in_grid()) continue;
    ids_[cursor[static_cast<std::size_t>(px.row) * grid_.width() + px.col]++] = static_cast<std::uint32_t>(p);
  }
  // Ids within each bucket are already ascending; a stable sort by range keeps
  // the id tiebreak.
  for (std::size_t f = 0; f < n_pix; ++f) {
    if (offsets_[f + 1] - offsets_[f] < 2) continue;
    std::stable_sort(ids_.begin() + static_cast<std::ptrdiff_t>(offsets_[f]),
                     ids_.begin() + static_cast<std::ptrdiff_t>(offsets_[f + 1]),
                     [&](std::uint32_t a, std::uint32_t b) { return range_[a] < range_[b]; });
  }
}

std::span<const std::uint32_t> ProjectionIndex::points_in(std::size_t row, std::size_t col) const {
  return points_in(row * grid_.width() + col);
}

std::span<const std::uint32_t> ProjectionIndex::points_in(std::size_t flat) const {
  return std::span<const std::uint32_t>(ids_).subspan(offsets_[flat], offsets_[flat + 1] - offsets_[flat]);
}

ProjectionIndex project(const PointCloud& cloud, const GridSpec& grid, unsigned workers) {
  const std::size_t n = cloud.size();
  std::vector<PixelCoord> pix(n);
  std::vector<double> range(n);
  parallel_for_chunks(n, 1 << 15, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& p = cloud.points[i];
      const double x = p.x, y = p.y, z = p.z;
      range[i] = std::sqrt(x * x + y * y + z * z);
      if (!(range[i] > 0.0)) continue;
      pix[i] = pixel_of(grid, compute_angles(x, y, z));
    }
  });
  return ProjectionIndex(grid, std::move(pix), std::move(range));
}

std::size_t DensityMap::mode() const {
  return static_cast<std::size_t>(std::max_element(histogram.begin(), histogram.end()) - histogram.begin());
}

std::size_t DensityMap::pixels_above(std::size_t count) const {
  std::size_t total = 0;
  for (std::size_t c = count + 1; c < histogram.size(); ++c) total += histogram[c];
  return total;
}

DensityMap density_map(const ProjectionIndex& index) {
  DensityMap d;
  d.counts = Image<std::uint32_t>(index.height(), index.width());
  std::size_t max_count = 0;
  for (std::size_t f = 0; f < d.counts.size(); ++f) {
    d.counts[f] = static_cast<std::uint32_t>(index.count(f));
    max_count = std::max<std::size_t>(max_count, d.counts[f]);
  }
  d.histogram.assign(max_count + 1, 0);
  for (std::size_t f = 0; f < d.counts.size(); ++f) ++d.histogram[d.counts[f]];
  return d;
}

RealMap rasterize_channel(const ProjectionIndex& index, std::span<const double> values, Reducer reducer) {
  if (values.size() != index.point_count())
    throw InvalidArgument("rasterize_channel: " + std::to_string(values.size()) + " values for " +
                          std::to_string(index.point_count()) + " points");
  RealMap out(index.height(), index.width(), 0.0);
  for (std::size_t f = 0; f < out.size(); ++f) {
    const auto ids = index.points_in(f);
    if (ids.empty()) continue;
    switch (reducer) {
      case Reducer::kNearest: out[f] = values[ids.front()]; break;
      case Reducer::kMean: {
        double s = 0.0;
        for (auto id : ids) s += values[id];
        out[f] = s / static_cast<double>(ids.size());
        break;
      }
      case Reducer::kMax: {
        double m = -INFINITY;
        for (auto id : ids) m = std::max(m, values[id]);
        out[f] = m;
        break;
      }
    }
  }
  return out;
}

LabelMask rasterize_labels(const ProjectionIndex& index, std::span<const std::uint8_t> labels) {
  if (labels.size() != index.point_count()) throw InvalidArgument("rasterize_labels: length mismatch");
  LabelMask out(index.height(), index.width(), kVoid);
  for (std::size_t f = 0; f < out.size(); ++f) {
    const auto ids = index.points_in(f);
    if (!ids.empty()) out[f] = labels[ids.front()];
  }
  return out;
}

BoolMask occupancy(const ProjectionIndex& index) {
  BoolMask out(index.height(), index.width(), 0);
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = index.count(f) > 0 ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> back_project(const ProjectionIndex& index, const LabelMask& mask) {
  if (!mask.same_shape(index.height(), index.width()))
    throw InvalidArgument("back_project: mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                          ", grid is " + std::to_string(index.height()) + "x" + std::to_string(index.width()));
  std::vector<std::uint8_t> labels(index.point_count(), kVoid);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto& px = index.pixel(p);
    if (px.in_grid()) labels[p] = mask(static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col));
  }
  return labels;
}

namespace {
std::size_t span_cells(double span_deg, double res_deg) {
  // Tolerate representation error so 135/0.25 does not round up to 541.
  return static_cast<std::size_t>(std::ceil(span_deg / res_deg - 1e-9));
}
}  // namespace

std::size_t VirtualSphereSpec::rows() const { return span_cells(zenith_max_deg - zenith_min_deg, resolution_deg); }
std::size_t VirtualSphereSpec::cols() const { return span_cells(azimuth_max_deg - azimuth_min_deg, resolution_deg); }

PointCloud virtual_sphere(const Image<Rgb>& colors, const GridSpec& grid, const VirtualSphereSpec& spec) {
  if (!(spec.resolution_deg > 0.0)) throw InvalidArgument("virtual sphere: resolution must be positive");
  if (!(spec.radius > 0.0)) throw InvalidArgument("virtual sphere: radius must be positive");
  if (!(spec.zenith_max_deg > spec.zenith_min_deg) || !(spec.azimuth_max_deg > spec.azimuth_min_deg))
    throw InvalidArgument("virtual sphere: empty angular span");
  if (!colors.same_shape(grid.height(), grid.width()))
    throw InvalidArgument("virtual sphere: color map does not match grid");
  constexpr double kSlack = 1e-9;
  if (spec.zenith_min_deg * kDeg < grid.theta_min() - kSlack || spec.zenith_max_deg * kDeg > grid.theta_max() + kSlack ||
      spec.azimuth_min_deg * kDeg < grid.phi_min() - kSlack || spec.azimuth_max_deg * kDeg > grid.phi_max() + kSlack)
    throw InvalidArgument("virtual sphere: span exceeds the source grid");

  const std::size_t rows = spec.rows();
  const std::size_t cols = spec.cols();
  const double res = spec.resolution_deg * kDeg;
  const double z0 = spec.zenith_min_deg * kDeg, z1 = spec.zenith_max_deg * kDeg;
  const double a0 = spec.azimuth_min_deg * kDeg, a1 = spec.azimuth_max_deg * kDeg;

  PointCloud out;
  out.points.resize(rows * cols);
  out.colors.resize(rows * cols);
  out.meta.source_id = "virtual_sphere";
  for (std::size_t r = 0; r < rows; ++r) {
    // The last row/column is clipped to the span, centered in what remains.
    const double t_lo = z0 + static_cast<double>(r) * res;
    const double theta = 0.5 * (t_lo + std::min(t_lo + res, z1));
    const auto i = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((theta - grid.theta_min()) / grid.d_theta())),
                                            0, static_cast<std::int64_t>(grid.height()) - 1);
    for (std::size_t c = 0; c < cols; ++c) {
      const double p_lo = a0 + static_cast<double>(c) * res;
      const double phi = 0.5 * (p_lo + std::min(p_lo + res, a1));
      const auto j = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((phi - grid.phi_min()) / grid.d_phi())),
                                              0, static_cast<std::int64_t>(grid.width()) - 1);
      Point3& p = out.points[r * cols + c];
      p.x = static_cast<float>(spec.radius * std::sin(theta) * std::cos(phi));
      p.y = static_cast<float>(spec.radius * std::sin(theta) * std::sin(phi));
      p.z = static_cast<float>(spec.radius * std::cos(theta));
      out.colors[r * cols + c] = colors(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return out;
}

}  // namespace lidarsphere
