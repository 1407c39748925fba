#include "features/feature_cube.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace lidarsphere {

namespace {
constexpr double kFloor = 0.01;
constexpr std::uint16_t kFcubVersion = 1;
}  // namespace

FeatureCube::FeatureCube(std::size_t height, std::size_t width, BoolMask valid)
    : height_(height), width_(width), valid_(std::move(valid)) {
  if (!valid_.same_shape(height, width)) throw InvalidArgument("feature cube: valid mask shape mismatch");
}

const RealMap& FeatureCube::channel(const std::string& name) const {
  for (const auto& c : channels_)
    if (c.name == name) return c.values;
  throw InvalidArgument("feature cube has no channel '" + name + "'");
}

std::vector<std::string> FeatureCube::names() const {
  std::vector<std::string> out;
  for (const auto& c : channels_) out.push_back(c.name);
  return out;
}

std::size_t FeatureCube::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.storage().begin(), valid_.storage().end(), 1));
}

void FeatureCube::add(std::string name, RealMap values) {
  if (!values.same_shape(height_, width_))
    throw InvalidArgument("channel '" + name + "' is " + std::to_string(values.height()) + "x" +
                          std::to_string(values.width()) + ", cube is " + std::to_string(height_) + "x" +
                          std::to_string(width_));
  for (const auto& c : channels_)
    if (c.name == name) throw InvalidArgument("duplicate channel name '" + name + "'");
  channels_.push_back({std::move(name), std::move(values)});
}

void FeatureCube::pixel(std::size_t flat, std::span<double> out) const {
  for (std::size_t c = 0; c < channels_.size(); ++c) out[c] = channels_[c].values[flat];
}

FeatureCube stack(const std::vector<const FeatureCube*>& parts) {
  if (parts.empty()) throw InvalidArgument("stack: nothing to stack");
  const std::size_t h = parts.front()->height(), w = parts.front()->width();
  BoolMask valid(h, w, 1);
  for (const auto* p : parts) {
    if (p->height() != h || p->width() != w) throw InvalidArgument("stack: cube dimensions differ");
    for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = valid[i] && p->valid()[i];
  }
  FeatureCube out(h, w, std::move(valid));
  for (const auto* p : parts)
    for (const auto& c : p->channels()) out.add(c.name, c.values);
  return out;
}

double percentile_sorted(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw InvalidArgument("percentile of empty sample");
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

std::vector<double> valid_values(const RealMap& map, const BoolMask& valid) {
  std::vector<double> v;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (valid[i]) v.push_back(map[i]);
  return v;
}

// Affine [lo, hi] -> [0.01, 1]; degenerate range collapses to `flat`.
RealMap normalize_range(const RealMap& map, const BoolMask& valid, double lo, double hi, double flat) {
  RealMap out(map.height(), map.width(), 0.0);
  const double span = hi - lo;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!valid[i]) continue;
    if (!(span > 0.0)) {
      out[i] = flat;
      continue;
    }
    const double t = (std::clamp(map[i], lo, hi) - lo) / span;
    out[i] = kFloor + (1.0 - kFloor) * t;
  }
  return out;
}

}  // namespace

RealMap histogram_stretch(const RealMap& map, const BoolMask& valid, const StretchPercentiles& pct) {
  if (!map.same_shape(valid)) throw InvalidArgument("histogram_stretch: mask shape mismatch");
  if (!(pct.low >= 0.0 && pct.low <= pct.high && pct.high <= 100.0))
    throw InvalidArgument("histogram_stretch: need 0 <= low <= high <= 100");
  auto v = valid_values(map, valid);
  if (v.empty()) throw DataError("histogram_stretch: map has no valid pixels");
  std::sort(v.begin(), v.end());
  return normalize_range(map, valid, percentile_sorted(v, pct.low), percentile_sorted(v, pct.high), kFloor);
}

RealMap inverted_height(const RealMap& z, const BoolMask& valid) {
  if (!z.same_shape(valid)) throw InvalidArgument("inverted_height: mask shape mismatch");
  auto v = valid_values(z, valid);
  if (v.empty()) throw DataError("inverted_height: map has no valid pixels");
  const double z_min = *std::min_element(v.begin(), v.end());
  const double z_max = *std::max_element(v.begin(), v.end());
  RealMap neg(z.height(), z.width(), 0.0);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (valid[i]) neg[i] = -(z[i] - z_min);
  return normalize_range(neg, valid, -(z_max - z_min), 0.0, 1.0);
}

FeatureCube preprocess_basic(const RealMap& intensity, const RealMap& range, const RealMap& z, const BoolMask& valid,
                             const StretchPercentiles& pct) {
  if (!intensity.same_shape(range) || !intensity.same_shape(z) || !intensity.same_shape(valid))
    throw InvalidArgument("preprocess_basic: maps differ in shape");
  FeatureCube cube(valid.height(), valid.width(), valid);
  if (cube.valid_count() == 0) throw DataError("preprocess_basic: all pixels are void");
  cube.add("intensity", histogram_stretch(intensity, valid, pct));
  cube.add("range", histogram_stretch(range, valid, pct));
  cube.add("z_inv", inverted_height(z, valid));
  return cube;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

std::array<double, 3> normal_color(const Vec3& n) {
  const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (!(len > 0.0)) throw InvalidArgument("normal_color: zero-length normal");
  constexpr double kPi = std::numbers::pi;
  double az = std::atan2(n[1], n[0]);
  if (az < 0.0) az += 2.0 * kPi;
  const double el = std::asin(std::clamp(n[2] / len, -1.0, 1.0));
  return hsv_to_rgb(az / (2.0 * kPi), 0.6, std::clamp((el + kPi / 2.0) / kPi, 0.0, 1.0));
}

FeatureCube normals_to_pseudo_rgb(const RealMap& nx, const RealMap& ny, const RealMap& nz, const BoolMask& valid) {
  if (!nx.same_shape(ny) || !nx.same_shape(nz) || !nx.same_shape(valid))
    throw InvalidArgument("normals_to_pseudo_rgb: maps differ in shape");
  RealMap r(nx.height(), nx.width(), 0.0), g = r, b = r;
  for (std::size_t i = 0; i < nx.size(); ++i) {
    if (!valid[i]) continue;
    const auto rgb = normal_color({nx[i], ny[i], nz[i]});
    r[i] = rgb[0];
    g[i] = rgb[1];
    b[i] = rgb[2];
  }
  FeatureCube cube(valid.height(), valid.width(), valid);
  cube.add("normal_r", std::move(r));
  cube.add("normal_g", std::move(g));
  cube.add("normal_b", std::move(b));
  return cube;
}

std::vector<double> correlation_matrix(const FeatureCube& cube, CorrelationScope scope) {
  const std::size_t c = cube.channel_count();
  if (c < 2) throw InvalidArgument("correlation_matrix: need at least two channels");
  std::vector<std::size_t> pix;
  for (std::size_t i = 0; i < cube.valid().size(); ++i)
    if (scope == CorrelationScope::kAll || cube.valid()[i]) pix.push_back(i);
  if (pix.size() < 2) throw InvalidArgument("correlation_matrix: need at least two pixels in scope");
  const double n = static_cast<double>(pix.size());
  std::vector<double> mean(c, 0.0), sd(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (auto i : pix) mean[k] += cube[k][i];
    mean[k] /= n;
    for (auto i : pix) sd[k] += (cube[k][i] - mean[k]) * (cube[k][i] - mean[k]);
    sd[k] = std::sqrt(sd[k]);
  }
  std::vector<double> out(c * c, std::nan(""));
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = a; b < c; ++b) {
      if (a == b) {
        out[a * c + a] = 1.0;
        continue;
      }
      if (!(sd[a] > 0.0) || !(sd[b] > 0.0)) continue;
      double s = 0.0;
      for (auto i : pix) s += (cube[a][i] - mean[a]) * (cube[b][i] - mean[b]);
      const double rho = std::clamp(s / (sd[a] * sd[b]), -1.0, 1.0);
      out[a * c + b] = out[b * c + a] = rho;
    }
  }
  return out;
}

void save_fcub(const FeatureCube& cube, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("FCUB", 4);
  binio::put<std::uint16_t>(out, kFcubVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(cube.height()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(cube.width()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(cube.channel_count()));
  for (const auto& ch : cube.channels()) binio::put_string(out, ch.name);
  std::vector<float> plane(cube.height() * cube.width());
  for (const auto& ch : cube.channels()) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = static_cast<float>(ch.values[i]);
    out.write(reinterpret_cast<const char*>(plane.data()), static_cast<std::streamsize>(plane.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

FeatureCube load_fcub(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string where = path.string();
  binio::expect_magic(in, "FCUB", where);
  const auto version = binio::get<std::uint16_t>(in, "FCUB version");
  if (version != kFcubVersion) throw DataError(where + ": unsupported FCUB version " + std::to_string(version));
  const auto h = binio::get<std::uint32_t>(in, "FCUB height");
  const auto w = binio::get<std::uint32_t>(in, "FCUB width");
  const auto c = binio::get<std::uint32_t>(in, "FCUB channel count");
  std::vector<std::string> names;
  for (std::uint32_t k = 0; k < c; ++k) names.push_back(binio::get_string(in, "FCUB channel name"));
  std::vector<RealMap> planes;
  std::vector<float> plane(static_cast<std::size_t>(h) * w);
  BoolMask valid(h, w, 0);
  for (std::uint32_t k = 0; k < c; ++k) {
    in.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(plane.size() * sizeof(float)));
    if (!in) throw DataError(where + ": truncated FCUB plane " + std::to_string(k));
    RealMap m(h, w);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      m[i] = plane[i];
      if (plane[i] != 0.0f) valid[i] = 1;
    }
    planes.push_back(std::move(m));
  }
  FeatureCube cube(h, w, std::move(valid));
  for (std::uint32_t k = 0; k < c; ++k) cube.add(names[k], std::move(planes[k]));
  return cube;
}

}  // namespace lidarsphere
