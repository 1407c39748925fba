#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "features/feature_cube.hpp"
#include "pointcloud/spatial_index.hpp"
#include "projection/spherical.hpp"
#include "synth/synthetic.hpp"

namespace lidarsphere {

struct GridConfig {
  double resolution_deg = 0.25;
  double zenith_min_deg = 0.0;
  double zenith_max_deg = 135.0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;

  GridSpec spec() const;
};

struct ReduceConfig {
  std::vector<std::string> kinds{"PCA", "MNF", "ICA"};
  std::size_t components = 3;
  /// Fit one model over every selected scan instead of one per scan.
  bool corpus = false;
};

struct EnsembleConfig {
  std::size_t models = 3;
  std::size_t classes = 6;
  /// LGTS paths; "{scan}" is replaced by the scan id. Each file adds its models.
  std::vector<std::string> logits;
  bool baseline = false;
  /// Baseline training masks: PNG path template with "{scan}". When empty, a
  /// seeded sample of the ground-truth pixels is used.
  std::string train_masks;
  double train_fraction = 0.05;
  std::size_t trees = 25;
  std::size_t max_depth = 16;
  bool save_logits = false;
};

struct RefineConfig {
  std::size_t k_vote = 9;
  double tau = 0.8;
  std::vector<double> scales{0.05, 0.15, 0.30};
  bool relabel_void = false;
  std::size_t trees = 100;
  std::size_t max_depth = 20;
  std::size_t core_sample_per_class = 20000;
  bool reproject = true;
};

struct SphereConfig {
  double resolution_deg = 1.0;
  double radius = 1.0;
  double zenith_min_deg = 0.0;
  double zenith_max_deg = 135.0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  /// "features" (first three channels as RGB) or "labels" (class palette).
  std::string source = "features";
};

struct EvalConfig {
  std::vector<std::uint8_t> exclude{0};
  std::size_t bins = 256;
  /// "auto" (refined mask when present, else fused), "fuse" or "refine".
  std::string prediction = "auto";
  /// Uncertainty channel ranked against errors: "epistemic", "total" or "expected".
  std::string score = "epistemic";
};

struct SynthConfig {
  std::size_t count = 3;
  std::size_t stems = 10;
  std::size_t rays_per_pixel = 1;
  double intensity_noise = 0.02;
  double range_noise = 0.0;
};

struct PipelineConfig {
  int version = 1;
  /// Directory of PLY files, a single file or a glob pattern.
  std::string input = "scans";
  std::string output = "out";
  std::uint64_t seed = 42;
  unsigned workers = 0;
  GridConfig grid;
  StretchPercentiles stretch;
  AdaptiveRadiusSpec radius;
  std::string feature_set = "IRZ_N3_CAP";
  std::size_t n_tiles = 5;
  std::size_t tile_buffer = 32;
  /// Featurize also writes the padded strips as network-input cubes.
  bool write_tiles = false;
  ReduceConfig reduce;
  EnsembleConfig ensemble;
  RefineConfig refine;
  SphereConfig sphere;
  EvalConfig eval;
  SynthConfig synth;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

inline constexpr int kConfigVersion = 1;

/// Parses a JSON document. Unknown keys and wrong types are ConfigErrors;
/// missing keys keep their defaults.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::string& path);
std::string config_to_json(const PipelineConfig& config);

/// Sets one dotted key ("refine.tau") from a JSON literal; a bare word that is
/// not valid JSON is taken as a string.
void apply_override(PipelineConfig& config, const std::string& key, const std::string& value);

}  // namespace lidarsphere
