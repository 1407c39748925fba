#include "synth/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace lidarsphere {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cylinder {  // vertical
  double cx, cy, r, z0, z1;
  std::uint8_t cls;
};

struct Sphere {
  double cx, cy, cz, r;
  std::uint8_t cls;
};

struct Box {
  double lo[3], hi[3];
  std::uint8_t cls;
};

struct Scene {
  double ground_z = -1.6;
  double max_range = 60.0;
  std::vector<Cylinder> cylinders;
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
};

Scene build(const SceneSpec& s) {
  Scene sc;
  sc.ground_z = -s.scanner_height;
  sc.max_range = s.max_range;
  Rng rng(s.seed);
  const double g = sc.ground_z;
  for (std::size_t i = 0; i < s.stems; ++i) {
    const double a = 2.0 * std::numbers::pi * (static_cast<double>(i) + rng.uniform(0.1, 0.9)) /
                     static_cast<double>(std::max<std::size_t>(s.stems, 1));
    const double d = rng.uniform(2.5, 9.0);
    const double cx = d * std::cos(a), cy = d * std::sin(a);
    const double r = rng.uniform(0.10, 0.22);
    const double top = g + rng.uniform(4.5, 7.0);
    sc.cylinders.push_back({cx, cy, r, g, top, 2});
    if (s.canopy) sc.spheres.push_back({cx, cy, top + rng.uniform(0.5, 1.0), rng.uniform(1.4, 2.2), 3});
    if (s.roots) {
      for (int k = 0; k < 5; ++k) {
        const double b = 2.0 * std::numbers::pi * (k + rng.uniform(0.0, 0.5)) / 5.0;
        const double off = r + rng.uniform(0.25, 0.45);
        sc.cylinders.push_back({cx + off * std::cos(b), cy + off * std::sin(b), rng.uniform(0.03, 0.05), g,
                                g + rng.uniform(0.5, 0.9), 4});
      }
    }
  }
  if (s.object) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi), d = rng.uniform(3.0, 5.0);
    const double cx = d * std::cos(a), cy = d * std::sin(a);
    sc.boxes.push_back({{cx - 0.5, cy - 0.4, g}, {cx + 0.5, cy + 0.4, g + 0.8}, 5});
  }
  return sc;
}

struct Hit {
  double t = kInf;
  std::uint8_t cls = kVoid;
};

void hit_cylinder(const Cylinder& c, const double o[3], const double d[3], Hit& best) {
  const double ox = o[0] - c.cx, oy = o[1] - c.cy;
  const double a = d[0] * d[0] + d[1] * d[1];
  if (a < 1e-15) return;
  const double b = 2.0 * (ox * d[0] + oy * d[1]);
  const double cc = ox * ox + oy * oy - c.r * c.r;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= 1e-6 || t >= best.t) continue;
    const double z = o[2] + t * d[2];
    if (z < c.z0 || z > c.z1) continue;
    best = {t, c.cls};
    return;
  }
}

void hit_sphere(const Sphere& s, const double o[3], const double d[3], Hit& best) {
  const double ox = o[0] - s.cx, oy = o[1] - s.cy, oz = o[2] - s.cz;
  const double b = ox * d[0] + oy * d[1] + oz * d[2];
  const double c = ox * ox + oy * oy + oz * oz - s.r * s.r;
  const double disc = b * b - c;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  for (double t : {-b - sq, -b + sq}) {
    if (t <= 1e-6 || t >= best.t) continue;
    best = {t, s.cls};
    return;
  }
}

void hit_box(const Box& bx, const double o[3], const double d[3], Hit& best) {
  double t0 = 0.0, t1 = kInf;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < bx.lo[k] || o[k] > bx.hi[k]) return;
      continue;
    }
    double a = (bx.lo[k] - o[k]) / d[k], b = (bx.hi[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return;
  }
  if (t0 > 1e-6 && t0 < best.t) best = {t0, bx.cls};
}

Hit cast(const Scene& sc, double theta, double phi) {
  const double o[3] = {0, 0, 0};
  const double d[3] = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
  Hit best;
  best.t = sc.max_range;
  if (d[2] < -1e-12) {
    const double t = sc.ground_z / d[2];
    if (t > 0.0 && t < best.t) best = {t, 1};
  }
  for (const auto& c : sc.cylinders) hit_cylinder(c, o, d, best);
  for (const auto& s : sc.spheres) hit_sphere(s, o, d, best);
  for (const auto& b : sc.boxes) hit_box(b, o, d, best);
  if (best.cls == kVoid) best.t = kInf;
  return best;
}

struct Emitter {
  const SceneSpec& spec;
  Scene scene;
  Rng rng;
  PointCloud cloud;

  explicit Emitter(const SceneSpec& s) : spec(s), scene(build(s)), rng(s.seed ^ 0x9e3779b97f4a7c15ULL) {
    cloud.has_intensity = true;
    cloud.has_labels = true;
    cloud.meta.source_id = "synthetic";
  }

  bool emit(double theta, double phi) {
    const Hit h = cast(scene, theta, phi);
    if (h.cls == kVoid) return false;
    double t = h.t;
    if (spec.range_noise > 0.0) t = std::max(0.05, t + spec.range_noise * rng.normal());
    const double st = std::sin(theta);
    Point3 p;
    p.x = static_cast<float>(t * st * std::cos(phi));
    p.y = static_cast<float>(t * st * std::sin(phi));
    p.z = static_cast<float>(t * std::cos(theta));
    const double jitter = spec.intensity_noise * rng.uniform(-1.0, 1.0);
    p.intensity = static_cast<float>(std::clamp(class_intensity(h.cls) + 1000.0 * jitter, 0.0, 1000.0));
    p.label = h.cls;
    cloud.points.push_back(p);
    return true;
  }
};

}  // namespace

double class_intensity(std::uint8_t cls) {
  switch (cls) {
    case 1: return 150.0;
    case 2: return 350.0;
    case 3: return 550.0;
    case 4: return 750.0;
    case 5: return 930.0;
    default: return 0.0;
  }
}

PointCloud synthetic_scan(const GridSpec& grid, const SceneSpec& spec) {
  Emitter e(spec);
  for (std::size_t r = 0; r < grid.height(); ++r)
    for (std::size_t c = 0; c < grid.width(); ++c) e.emit(grid.row_center(r), grid.col_center(c));
  return std::move(e.cloud);
}

PointCloud synthetic_scan(const GridSpec& grid, const SceneSpec& spec, std::size_t rays_per_pixel) {
  if (rays_per_pixel == 0) throw InvalidArgument("synthetic_scan: rays_per_pixel must be positive");
  if (rays_per_pixel == 1) return synthetic_scan(grid, spec);
  Emitter e(spec);
  for (std::size_t r = 0; r < grid.height(); ++r)
    for (std::size_t c = 0; c < grid.width(); ++c)
      for (std::size_t k = 0; k < rays_per_pixel; ++k) {
        const double u = e.rng.uniform(0.02, 0.98), v = e.rng.uniform(0.02, 0.98);
        e.emit(grid.theta_min() + (static_cast<double>(r) + u) * grid.d_theta(),
               grid.phi_min() + (static_cast<double>(c) + v) * grid.d_phi());
      }
  return std::move(e.cloud);
}

PointCloud synthetic_scan_points(const GridSpec& grid, const SceneSpec& spec, std::size_t points) {
  Emitter e(spec);
  e.cloud.points.reserve(points);
  const std::size_t max_attempts = points * 20 + 1000;
  std::size_t attempts = 0;
  while (e.cloud.size() < points) {
    if (++attempts > max_attempts) throw DataError("synthetic_scan_points: scene too sparse for the requested count");
    const double theta = e.rng.uniform(grid.theta_min(), grid.theta_max());
    const double phi = e.rng.uniform(grid.phi_min(), grid.phi_max());
    e.emit(theta, phi);
  }
  return std::move(e.cloud);
}

PointCloud beam_aligned_shell(const GridSpec& grid, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("beam_aligned_shell: radius must be positive");
  PointCloud c;
  c.points.reserve(grid.pixels());
  for (std::size_t r = 0; r < grid.height(); ++r) {
    const double t = grid.row_center(r), st = std::sin(t), ct = std::cos(t);
    for (std::size_t col = 0; col < grid.width(); ++col) {
      const double p = grid.col_center(col);
      c.points.push_back({static_cast<float>(radius * st * std::cos(p)), static_cast<float>(radius * st * std::sin(p)),
                          static_cast<float>(radius * ct), 0.0f, kVoid});
    }
  }
  c.meta.source_id = "shell";
  return c;
}

}  // namespace lidarsphere
