#pragma once

#include <cstddef>
#include <cstdint>

#include "pointcloud/point_cloud.hpp"
#include "projection/spherical.hpp"

namespace lidarsphere {

/// Procedural mangrove-like plot around a scanner at the origin, 1.6 m above a
/// flat ground: stems (vertical cylinders) with canopy spheres on top, thin
/// prop roots around stem bases and one box-shaped object. Each class has its
/// own intensity band, so classes are linearly separable on intensity.
struct SceneSpec {
  std::uint64_t seed = 42;
  std::size_t stems = 10;
  bool canopy = true;
  bool roots = true;
  bool object = true;
  double scanner_height = 1.6;
  double max_range = 60.0;
  double intensity_noise = 0.02;  // uniform half-width, fraction of full scale
  double range_noise = 0.0;       // meters, std-dev along the beam
};

/// Nominal intensity of a class (0..1000 scale).
double class_intensity(std::uint8_t cls);

/// One beam through the center of every pixel; misses produce no point.
PointCloud synthetic_scan(const GridSpec& grid, const SceneSpec& spec);

/// `rays_per_pixel` jittered beams per pixel (stratified), so pixels near
/// edges can hold returns from several classes.
PointCloud synthetic_scan(const GridSpec& grid, const SceneSpec& spec, std::size_t rays_per_pixel);

/// Jittered beams over the whole grid until exactly `points` returns are
/// collected. Throws DataError if the scene is too sparse to reach the count.
PointCloud synthetic_scan_points(const GridSpec& grid, const SceneSpec& spec, std::size_t points);

/// A point at every pixel center at a fixed radius: one return per pixel.
PointCloud beam_aligned_shell(const GridSpec& grid, double radius = 10.0);

}  // namespace lidarsphere
