#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pipeline/config.hpp"

namespace lidarsphere {

struct ScanInput {
  std::string id;  // file stem
  std::filesystem::path path;
};

/// PLY files named by `input`: a directory (every *.ply), a single file or a
/// glob over file names. Sorted by path. Throws DataError when nothing matches.
std::vector<ScanInput> discover_scans(const std::string& input);

enum class Stage { kSynth, kProject, kDensity, kFeaturize, kReduce, kFuse, kBackproject, kRefine, kSphere, kEval, kRun };

/// Throws ConfigError listing the stage names.
Stage parse_stage(const std::string& name);
const char* to_string(Stage stage);
std::vector<std::string> stage_names();

/// Runs stages over every selected scan. Artifacts go to
/// <output>/<scan_id>/<stage>/, so each stage can be rerun on its own.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const noexcept { return config_; }
  std::filesystem::path scan_dir(const std::string& scan_id) const;
  std::filesystem::path stage_dir(const std::string& scan_id, Stage stage) const;

  /// JSON report of the run. "run" executes project, featurize, fuse, refine,
  /// sphere and eval in order.
  std::string run(Stage stage);

 private:
  PipelineConfig config_;
};

}  // namespace lidarsphere
