#pragma once

#include <string>
#include <vector>

#include "features/descriptors.hpp"
#include "features/feature_cube.hpp"
#include "projection/spherical.hpp"
#include "reduction/reduction.hpp"

namespace lidarsphere {

/// Three-channel feature groups that named sets are built from.
enum class Trio { kRaw, kIrz, kN3, kCap, kPca, kMnf, kIca };

const char* to_string(Trio trio);

/// A set name such as "IRZ_N3_CAP": trio tokens joined by '_', in channel
/// order. "I.R.Z" and "C.A.P" are accepted spellings of IRZ and CAP; RAW is the
/// unprocessed intensity/range/z trio.
struct FeatureSetSpec {
  std::string name;
  std::vector<Trio> trios;
  std::size_t channel_count() const { return 3 * trios.size(); }
};

/// Throws ConfigError naming the known sets for an unknown or repeated token.
FeatureSetSpec parse_feature_set(const std::string& name);
std::vector<std::string> known_feature_sets();

/// Per-pixel values of each scan attribute, taken from the nearest point in
/// the pixel. `valid` marks occupied pixels.
struct ScanRasters {
  RealMap intensity, range, z;
  RealMap nx, ny, nz;
  RealMap curvature, anisotropy, planarity;
  BoolMask valid;
};

/// Id of the nearest point of every occupied pixel, in pixel order.
std::vector<std::uint32_t> nearest_occupants(const ProjectionIndex& index);

/// Rasters from precomputed per-point descriptors.
ScanRasters rasterize_scan(const PointCloud& cloud, const ProjectionIndex& index,
                           const std::vector<EigenFeatures>& descriptors);

/// Builds the spatial index and computes descriptors for the nearest occupant
/// of each pixel only, then rasterizes.
ScanRasters compute_scan_rasters(const PointCloud& cloud, const ProjectionIndex& index,
                                 const DescriptorOptions& options = {});

/// Unprocessed intensity, range and z channels.
FeatureCube raw_cube(const ScanRasters& r);

struct FeatureSetOptions {
  StretchPercentiles stretch;
  IcaOptions ica;
  double mnf_ridge = 1e-6;
};

/// Materializes a named set. PCA/MNF/ICA trios are fitted on this scan's
/// nine-channel IRZ_N3_CAP stack; fitted models are appended to `models` when
/// it is non-null.
FeatureCube build_feature_set(const ScanRasters& rasters, const FeatureSetSpec& spec,
                              const FeatureSetOptions& options = {},
                              std::vector<ReductionModel>* models = nullptr);

}  // namespace lidarsphere
