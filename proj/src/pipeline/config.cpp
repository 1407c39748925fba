#include "pipeline/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "features/feature_sets.hpp"
#include "reduction/reduction.hpp"

namespace lidarsphere {

using json = nlohmann::json;

GridSpec GridConfig::spec() const {
  return GridSpec::from_degrees(resolution_deg, zenith_min_deg, zenith_max_deg, azimuth_min_deg, azimuth_max_deg);
}

namespace {

json to_json_doc(const PipelineConfig& c) {
  return json{
      {"version", c.version},
      {"input", c.input},
      {"output", c.output},
      {"seed", c.seed},
      {"workers", c.workers},
      {"grid",
       {{"resolution_deg", c.grid.resolution_deg},
        {"zenith_min_deg", c.grid.zenith_min_deg},
        {"zenith_max_deg", c.grid.zenith_max_deg},
        {"azimuth_min_deg", c.grid.azimuth_min_deg},
        {"azimuth_max_deg", c.grid.azimuth_max_deg}}},
      {"preprocessing",
       {{"low_percentile", c.stretch.low},
        {"high_percentile", c.stretch.high},
        {"radius_scale", c.radius.lambda},
        {"k_ref", c.radius.k_ref},
        {"r_min", c.radius.r_min},
        {"r_max", c.radius.r_max}}},
      {"feature_set", c.feature_set},
      {"tiling", {{"n_tiles", c.n_tiles}, {"buffer", c.tile_buffer}, {"write_tiles", c.write_tiles}}},
      {"reduce", {{"kinds", c.reduce.kinds}, {"components", c.reduce.components}, {"corpus", c.reduce.corpus}}},
      {"ensemble",
       {{"models", c.ensemble.models},
        {"classes", c.ensemble.classes},
        {"logits", c.ensemble.logits},
        {"baseline", c.ensemble.baseline},
        {"train_masks", c.ensemble.train_masks},
        {"train_fraction", c.ensemble.train_fraction},
        {"trees", c.ensemble.trees},
        {"max_depth", c.ensemble.max_depth},
        {"save_logits", c.ensemble.save_logits}}},
      {"refine",
       {{"k_vote", c.refine.k_vote},
        {"tau", c.refine.tau},
        {"scales", c.refine.scales},
        {"relabel_void", c.refine.relabel_void},
        {"trees", c.refine.trees},
        {"max_depth", c.refine.max_depth},
        {"core_sample_per_class", c.refine.core_sample_per_class},
        {"reproject", c.refine.reproject}}},
      {"sphere",
       {{"resolution_deg", c.sphere.resolution_deg},
        {"radius", c.sphere.radius},
        {"zenith_min_deg", c.sphere.zenith_min_deg},
        {"zenith_max_deg", c.sphere.zenith_max_deg},
        {"azimuth_min_deg", c.sphere.azimuth_min_deg},
        {"azimuth_max_deg", c.sphere.azimuth_max_deg},
        {"source", c.sphere.source}}},
      {"eval",
       {{"exclude", c.eval.exclude},
        {"bins", c.eval.bins},
        {"prediction", c.eval.prediction},
        {"score", c.eval.score}}},
      {"synth",
       {{"count", c.synth.count},
        {"stems", c.synth.stems},
        {"rays_per_pixel", c.synth.rays_per_pixel},
        {"intensity_noise", c.synth.intensity_noise},
        {"range_noise", c.synth.range_noise}}},
  };
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for " + where + key + ": " + e.what());
  }
}

PipelineConfig from_json_doc(const json& j) {
  PipelineConfig c;
  read(j, "version", c.version, "");
  read(j, "input", c.input, "");
  read(j, "output", c.output, "");
  read(j, "seed", c.seed, "");
  read(j, "workers", c.workers, "");
  const json& g = j.at("grid");
  read(g, "resolution_deg", c.grid.resolution_deg, "grid.");
  read(g, "zenith_min_deg", c.grid.zenith_min_deg, "grid.");
  read(g, "zenith_max_deg", c.grid.zenith_max_deg, "grid.");
  read(g, "azimuth_min_deg", c.grid.azimuth_min_deg, "grid.");
  read(g, "azimuth_max_deg", c.grid.azimuth_max_deg, "grid.");
  const json& p = j.at("preprocessing");
  read(p, "low_percentile", c.stretch.low, "preprocessing.");
  read(p, "high_percentile", c.stretch.high, "preprocessing.");
  read(p, "radius_scale", c.radius.lambda, "preprocessing.");
  read(p, "k_ref", c.radius.k_ref, "preprocessing.");
  read(p, "r_min", c.radius.r_min, "preprocessing.");
  read(p, "r_max", c.radius.r_max, "preprocessing.");
  read(j, "feature_set", c.feature_set, "");
  read(j.at("tiling"), "n_tiles", c.n_tiles, "tiling.");
  read(j.at("tiling"), "buffer", c.tile_buffer, "tiling.");
  read(j.at("tiling"), "write_tiles", c.write_tiles, "tiling.");
  const json& r = j.at("reduce");
  read(r, "kinds", c.reduce.kinds, "reduce.");
  read(r, "components", c.reduce.components, "reduce.");
  read(r, "corpus", c.reduce.corpus, "reduce.");
  const json& e = j.at("ensemble");
  read(e, "models", c.ensemble.models, "ensemble.");
  read(e, "classes", c.ensemble.classes, "ensemble.");
  read(e, "logits", c.ensemble.logits, "ensemble.");
  read(e, "baseline", c.ensemble.baseline, "ensemble.");
  read(e, "train_masks", c.ensemble.train_masks, "ensemble.");
  read(e, "train_fraction", c.ensemble.train_fraction, "ensemble.");
  read(e, "trees", c.ensemble.trees, "ensemble.");
  read(e, "max_depth", c.ensemble.max_depth, "ensemble.");
  read(e, "save_logits", c.ensemble.save_logits, "ensemble.");
  const json& f = j.at("refine");
  read(f, "k_vote", c.refine.k_vote, "refine.");
  read(f, "tau", c.refine.tau, "refine.");
  read(f, "scales", c.refine.scales, "refine.");
  read(f, "relabel_void", c.refine.relabel_void, "refine.");
  read(f, "trees", c.refine.trees, "refine.");
  read(f, "max_depth", c.refine.max_depth, "refine.");
  read(f, "core_sample_per_class", c.refine.core_sample_per_class, "refine.");
  read(f, "reproject", c.refine.reproject, "refine.");
  const json& s = j.at("sphere");
  read(s, "resolution_deg", c.sphere.resolution_deg, "sphere.");
  read(s, "radius", c.sphere.radius, "sphere.");
  read(s, "zenith_min_deg", c.sphere.zenith_min_deg, "sphere.");
  read(s, "zenith_max_deg", c.sphere.zenith_max_deg, "sphere.");
  read(s, "azimuth_min_deg", c.sphere.azimuth_min_deg, "sphere.");
  read(s, "azimuth_max_deg", c.sphere.azimuth_max_deg, "sphere.");
  read(s, "source", c.sphere.source, "sphere.");
  const json& v = j.at("eval");
  read(v, "exclude", c.eval.exclude, "eval.");
  read(v, "bins", c.eval.bins, "eval.");
  read(v, "prediction", c.eval.prediction, "eval.");
  read(v, "score", c.eval.score, "eval.");
  const json& y = j.at("synth");
  read(y, "count", c.synth.count, "synth.");
  read(y, "stems", c.synth.stems, "synth.");
  read(y, "rays_per_pixel", c.synth.rays_per_pixel, "synth.");
  read(y, "intensity_noise", c.synth.intensity_noise, "synth.");
  read(y, "range_noise", c.synth.range_noise, "synth.");
  return c;
}

bool compatible(const json& def, const json& val) {
  if (def.is_number()) {
    if (!val.is_number()) return false;
    if (def.is_number_integer() && !val.is_number_integer()) return false;
    if (def.is_number_unsigned() && val.is_number_integer() && val.get<std::int64_t>() < 0) return false;
    return true;
  }
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return false;
}

// Overlays `user` onto `base`; every user key must exist in the defaults.
void merge(json& base, const json& user, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix + it.key();
    if (!base.contains(it.key())) throw ConfigError("config: unknown key \"" + key + "\"");
    json& slot = base[it.key()];
    if (!compatible(slot, it.value()))
      throw ConfigError("config: \"" + key + "\" expects a " + std::string(slot.type_name()) + ", got " +
                        it.value().type_name());
    if (slot.is_object())
      merge(slot, it.value(), key + ".");
    else
      slot = it.value();
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

void PipelineConfig::validate() const {
  require(version == kConfigVersion, "unsupported version " + std::to_string(version) + " (expected " +
                                         std::to_string(kConfigVersion) + ")");
  require(!input.empty(), "input must not be empty");
  require(!output.empty(), "output must not be empty");
  try {
    (void)grid.spec();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: invalid grid: ") + e.what());
  }
  require(stretch.low >= 0 && stretch.low < stretch.high && stretch.high <= 100,
          "preprocessing percentiles must satisfy 0 <= low < high <= 100");
  try {
    radius.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: preprocessing radius: ") + e.what());
  }
  (void)parse_feature_set(feature_set);
  require(n_tiles >= 1, "tiling.n_tiles must be at least 1");
  require(!reduce.kinds.empty(), "reduce.kinds must not be empty");
  for (const auto& k : reduce.kinds) {
    try {
      (void)parse_reduction_kind(k);
    } catch (const Error&) {
      throw ConfigError("config: reduce.kinds: unknown kind \"" + k + "\" (known: PCA, MNF, ICA)");
    }
  }
  require(reduce.components >= 1 && reduce.components <= 9, "reduce.components must lie in [1, 9]");
  require(ensemble.models >= 1, "ensemble.models must be at least 1");
  require(ensemble.classes >= 2 && ensemble.classes <= 256, "ensemble.classes must lie in [2, 256]");
  require(ensemble.train_fraction > 0 && ensemble.train_fraction <= 1, "ensemble.train_fraction must lie in (0, 1]");
  require(ensemble.trees >= 1, "ensemble.trees must be at least 1");
  require(ensemble.max_depth >= 1, "ensemble.max_depth must be at least 1");
  require(refine.k_vote >= 1, "refine.k_vote must be at least 1");
  require(refine.tau > 0 && refine.tau <= 1, "refine.tau must lie in (0, 1]");
  require(!refine.scales.empty(), "refine.scales must not be empty");
  for (double s : refine.scales) require(s > 0 && std::isfinite(s), "refine.scales must be positive");
  require(refine.trees >= 1, "refine.trees must be at least 1");
  require(refine.max_depth >= 1, "refine.max_depth must be at least 1");
  require(sphere.resolution_deg > 0, "sphere.resolution_deg must be positive");
  require(sphere.radius > 0, "sphere.radius must be positive");
  require(sphere.source == "features" || sphere.source == "labels", "sphere.source must be \"features\" or \"labels\"");
  require(eval.bins >= 2, "eval.bins must be at least 2");
  require(eval.prediction == "auto" || eval.prediction == "fuse" || eval.prediction == "refine",
          "eval.prediction must be \"auto\", \"fuse\" or \"refine\"");
  require(eval.score == "epistemic" || eval.score == "total" || eval.score == "expected",
          "eval.score must be \"epistemic\", \"total\" or \"expected\"");
  require(synth.count >= 1, "synth.count must be at least 1");
  require(synth.rays_per_pixel >= 1, "synth.rays_per_pixel must be at least 1");
  require(synth.intensity_noise >= 0 && synth.range_noise >= 0, "synth noise levels must be non-negative");
}

PipelineConfig config_from_json(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  if (!user.contains("version")) throw ConfigError("config: missing \"version\"");
  json doc = to_json_doc(PipelineConfig{});
  merge(doc, user, "");
  PipelineConfig c = from_json_doc(doc);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const PipelineConfig& config) { return to_json_doc(config).dump(2); }

void apply_override(PipelineConfig& config, const std::string& key, const std::string& value) {
  json doc = to_json_doc(config);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* slot = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!slot->is_object() || !slot->contains(part)) throw ConfigError("config: unknown key \"" + key + "\"");
    slot = &(*slot)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (slot->is_object()) throw ConfigError("config: \"" + key + "\" is a section, not a value");
  if (slot->is_string() && !parsed.is_string()) parsed = value;
  if (!compatible(*slot, parsed))
    throw ConfigError("config: \"" + key + "\" expects a " + std::string(slot->type_name()) + ", got " +
                      parsed.type_name());
  *slot = parsed;
  PipelineConfig c = from_json_doc(doc);
  c.validate();
  config = std::move(c);
}

}  // namespace lidarsphere
