// Command-line front end. Links only the C interface of liblidarsphere.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lidarsphere/lidarsphere.h"

namespace {

const char* const kStages[][2] = {
    {"synth", "Write synthetic labeled scans into the input directory"},
    {"project", "Project scans onto the spherical grid (index, density, raw cube)"},
    {"density", "Per-pixel point-count histogram and density image"},
    {"featurize", "Materialize the configured feature set with preview images"},
    {"reduce", "Fit PCA / MNF / ICA on the nine-channel stack"},
    {"fuse", "Fuse ensemble logits into pseudo-labels and uncertainty maps"},
    {"backproject", "Transfer fused labels onto the points"},
    {"refine", "Back-project, smooth and relabel in 3D"},
    {"sphere", "Write a virtual-sphere thumbnail per scan"},
    {"eval", "Metrics against ground truth, PR curves and summary table"},
    {"run", "project, featurize, fuse, refine, sphere and eval in order"},
};

struct Options {
  std::string config;
  std::string scan;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool baseline = false;
  std::string feature_set;
  std::vector<std::string> overrides;
  bool quiet = false;
  bool print_config = false;
};

int fail(ls_status s) {
  std::fprintf(stderr, "lidarsphere: %s: %s\n", ls_status_name(s), ls_last_error());
  return ls_status_exit_code(s);
}

struct ConfigDeleter {
  void operator()(ls_config* c) const { ls_config_free(c); }
};
struct PipelineDeleter {
  void operator()(ls_pipeline* p) const { ls_pipeline_free(p); }
};

int run(const std::string& stage, const Options& o) {
  ls_config* raw = nullptr;
  ls_status s = o.config.empty() ? ls_config_default(&raw) : ls_config_load(o.config.c_str(), &raw);
  if (s != LS_OK) return fail(s);
  std::unique_ptr<ls_config, ConfigDeleter> cfg(raw);

  std::vector<std::pair<std::string, std::string>> sets;
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "lidarsphere: config error: --set expects KEY=VALUE, got \"%s\"\n", kv.c_str());
      return 2;
    }
    sets.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.scan.empty()) sets.emplace_back("input", o.scan);
  if (!o.out.empty()) sets.emplace_back("output", o.out);
  if (o.seed) sets.emplace_back("seed", std::to_string(*o.seed));
  if (o.workers) sets.emplace_back("workers", std::to_string(*o.workers));
  if (o.baseline) sets.emplace_back("ensemble.baseline", "true");
  if (!o.feature_set.empty()) sets.emplace_back("feature_set", o.feature_set);
  for (const auto& [k, v] : sets)
    if ((s = ls_config_set(cfg.get(), k.c_str(), v.c_str())) != LS_OK) return fail(s);

  if (o.print_config) {
    char* text = nullptr;
    if ((s = ls_config_to_json(cfg.get(), &text)) != LS_OK) return fail(s);
    std::printf("%s\n", text);
    ls_string_free(text);
  }

  ls_pipeline* rp = nullptr;
  if ((s = ls_pipeline_create(cfg.get(), &rp)) != LS_OK) return fail(s);
  std::unique_ptr<ls_pipeline, PipelineDeleter> pipe(rp);
  char* report = nullptr;
  if ((s = ls_pipeline_run(pipe.get(), stage.c_str(), &report)) != LS_OK) return fail(s);
  if (!o.quiet) std::printf("%s\n", report);
  ls_string_free(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lidarsphere: spherical-projection labeling pipeline for terrestrial LiDAR scans"};
  app.set_version_flag("--version", std::string(ls_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config, "Pipeline config (JSON)");
  app.add_option("--scan", o.scan, "Scan directory, PLY file or glob (overrides input)");
  app.add_option("--out", o.out, "Output directory (overrides output)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  app.add_flag("--baseline", o.baseline, "Fuse with the built-in forest ensemble instead of logit files");
  app.add_option("--feature-set", o.feature_set, "Feature set name, e.g. IRZ_N3_CAP");
  app.add_option("--set", o.overrides, "Override a config key, e.g. refine.tau=0.9")->allow_extra_args(false);
  app.add_flag("--quiet", o.quiet, "Do not print the JSON report");
  app.add_flag("--print-config", o.print_config, "Print the effective config before running");

  std::string chosen;
  for (const auto& st : kStages) {
    auto* sub = app.add_subcommand(st[0], st[1]);
    sub->callback([&chosen, name = std::string(st[0])] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (const char* level = std::getenv("LIDARSPHERE_LOG")) {
    const ls_status s = ls_set_log_level(level);
    if (s != LS_OK) return fail(s);
  }
  return run(chosen, o);
}
