#include "pipeline/pipeline.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "common/error.hpp"
#include "common/log.hpp"
#include "common/rng.hpp"
#include "ensemble/ensemble.hpp"
#include "eval/metrics.hpp"
#include "features/feature_sets.hpp"
#include "features/tiling.hpp"
#include "io/png_io.hpp"
#include "pipeline/render.hpp"
#include "pointcloud/ply.hpp"
#include "projection/index_io.hpp"
#include "reduction/reduction.hpp"
#include "refine/refinement.hpp"
#include "synth/synthetic.hpp"

namespace lidarsphere {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr Stage kAllStages[] = {Stage::kSynth,  Stage::kProject,     Stage::kDensity, Stage::kFeaturize,
                                Stage::kReduce, Stage::kFuse,        Stage::kBackproject, Stage::kRefine,
                                Stage::kSphere, Stage::kEval,        Stage::kRun};

const char* const kNineChannels[] = {"intensity", "range",      "z_inv",      "normal_r", "normal_g",
                                     "normal_b",  "curvature", "anisotropy", "planarity"};

bool has_glob_chars(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void require_file(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    throw DataError("missing stage output " + path.string() + "; run '" + std::string(producer) + "' first");
}

BoolMask read_valid(const fs::path& path) {
  Image<std::uint8_t> img = png::read_gray8(path);
  for (auto& v : img.storage()) v = v ? 1 : 0;
  return img;
}

void write_valid(const fs::path& path, const BoolMask& valid) {
  Image<std::uint8_t> img(valid.height(), valid.width());
  for (std::size_t i = 0; i < valid.size(); ++i) img[i] = valid[i] ? 255 : 0;
  png::write_gray8(path, img);
}

LabelMask read_mask(const fs::path& path, const GridSpec& grid) {
  LabelMask m = png::read_gray8(path);
  if (!m.same_shape(grid.height(), grid.width()))
    throw DataError(path.string() + ": mask is " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                    ", grid is " + std::to_string(grid.height()) + "x" + std::to_string(grid.width()));
  return m;
}

FeatureCube with_valid(const FeatureCube& cube, const BoolMask& valid) {
  if (!valid.same_shape(cube.height(), cube.width())) throw DataError("valid mask does not match the feature cube");
  FeatureCube out(cube.height(), cube.width(), valid);
  for (const auto& ch : cube.channels()) out.add(ch.name, ch.values);
  return out;
}

std::string replace_scan(std::string tmpl, const std::string& id) {
  const std::string key = "{scan}";
  for (std::size_t pos; (pos = tmpl.find(key)) != std::string::npos;) tmpl.replace(pos, key.size(), id);
  return tmpl;
}

json density_json(const DensityMap& d, const ProjectionIndex& index) {
  std::size_t occupied = 0, max_count = 0;
  for (std::size_t c = 1; c < d.histogram.size(); ++c) {
    occupied += d.histogram[c];
    if (d.histogram[c]) max_count = c;
  }
  std::size_t mode_occupied = 0;
  for (std::size_t c = 1; c < d.histogram.size(); ++c)
    if (mode_occupied == 0 || d.histogram[c] > d.histogram[mode_occupied]) mode_occupied = c;
  return json{{"height", index.height()},
              {"width", index.width()},
              {"points", index.point_count()},
              {"points_in_grid", index.in_grid_count()},
              {"occupied_pixels", occupied},
              {"empty_pixels", d.histogram.empty() ? 0 : d.histogram[0]},
              {"mode", d.mode()},
              {"mode_occupied", mode_occupied},
              {"max_count", max_count},
              {"pixels_above_1", d.pixels_above(1)},
              {"histogram", d.histogram}};
}

json metrics_json(const Metrics& m) {
  json recall = json::array(), iou = json::array();
  for (const auto& r : m.recall) recall.push_back(r ? json(*r) : json(nullptr));
  for (const auto& r : m.iou) iou.push_back(r ? json(*r) : json(nullptr));
  const std::uint8_t void_id[] = {kVoid};
  return json{{"oAcc", m.oacc},
              {"mAcc", m.macc},
              {"mIoU", m.miou},
              {"mIoU_void_excluded", m.mean_iou_excluding(void_id)},
              {"recall", recall},
              {"IoU", iou}};
}

json confusion_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (std::size_t g = 0; g < cm.classes(); ++g) {
    json row = json::array();
    for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm.at(g, p));
    rows.push_back(row);
  }
  return rows;
}

/// Per-scan context shared by the stage bodies.
struct ScanJob {
  const Pipeline& pipe;
  const ScanInput& scan;

  const PipelineConfig& cfg() const { return pipe.config(); }
  fs::path dir(Stage s) const { return pipe.stage_dir(scan.id, s); }
  fs::path out(Stage s) const {
    fs::path d = dir(s);
    ensure_dir(d);
    return d;
  }

  PointCloud cloud() const {
    PointCloud c = load_ply(scan.path);
    c.validate();
    if (c.empty()) throw DataError(scan.path.string() + ": no points");
    return c;
  }

  ProjectionIndex index(const PointCloud& cloud) const {
    const fs::path p = dir(Stage::kProject) / "index.pidx";
    require_file(p, "project");
    ProjectionIndex idx = load_projection_index(p);
    if (idx.point_count() != cloud.size())
      throw DataError(p.string() + " holds " + std::to_string(idx.point_count()) + " points but " +
                      scan.path.string() + " has " + std::to_string(cloud.size()) + "; rerun 'project'");
    if (!(idx.grid() == cfg().grid.spec()))
      throw DataError(p.string() + " was built on a different grid; rerun 'project'");
    return idx;
  }

  FeatureCube features() const {
    const fs::path d = dir(Stage::kFeaturize);
    require_file(d / "features.fcub", "featurize");
    return with_valid(load_fcub(d / "features.fcub"), read_valid(d / "valid.png"));
  }

  std::uint64_t seed() const { return cfg().seed ^ fnv1a(scan.id); }
};

json stage_project(const ScanJob& job) {
  const auto& cfg = job.cfg();
  const PointCloud cloud = job.cloud();
  const ProjectionIndex index = project(cloud, cfg.grid.spec(), cfg.workers);
  const fs::path d = job.out(Stage::kProject);
  save_projection_index(index, d / "index.pidx");
  const DensityMap density = density_map(index);
  const json dj = density_json(density, index);
  write_text(d / "density.json", dj.dump(2));

  std::vector<double> intensity(cloud.size()), z(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    intensity[i] = cloud.points[i].intensity;
    z[i] = cloud.points[i].z;
  }
  const BoolMask valid = occupancy(index);
  FeatureCube raw(index.height(), index.width(), valid);
  raw.add("intensity_raw", rasterize_channel(index, intensity));
  raw.add("range_raw", rasterize_channel(index, index.ranges()));
  raw.add("z_raw", rasterize_channel(index, z));
  save_fcub(raw, d / "raw.fcub");
  write_valid(d / "valid.png", valid);

  json r{{"scan", job.scan.id},
         {"height", index.height()},
         {"width", index.width()},
         {"points", cloud.size()},
         {"occupied_pixels", dj["occupied_pixels"]},
         {"density_mode", dj["mode"]},
         {"pixels_above_1", dj["pixels_above_1"]}};
  if (cloud.has_labels) {
    std::vector<std::uint8_t> labels(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) labels[i] = cloud.points[i].label;
    const LabelMask gt = rasterize_labels(index, labels);
    png::write_gray8(d / "gt.png", gt);
    png::write_rgb8(d / "gt_color.png", colorize_labels(gt));
    r["ground_truth"] = true;
  } else {
    fs::remove(d / "gt.png");
    fs::remove(d / "gt_color.png");
    r["ground_truth"] = false;
  }
  return r;
}

json stage_density(const ScanJob& job) {
  const PointCloud cloud = job.cloud();
  const ProjectionIndex index = project(cloud, job.cfg().grid.spec(), job.cfg().workers);
  const DensityMap density = density_map(index);
  const fs::path d = job.out(Stage::kDensity);
  const json dj = density_json(density, index);
  write_text(d / "density.json", dj.dump(2));
  Image<std::uint16_t> counts(index.height(), index.width());
  for (std::size_t i = 0; i < counts.size(); ++i)
    counts[i] = static_cast<std::uint16_t>(std::min<std::uint32_t>(density.counts[i], 65535));
  png::write_gray16(d / "density.png", counts);
  return json{{"scan", job.scan.id},
              {"mode", dj["mode"]},
              {"mode_occupied", dj["mode_occupied"]},
              {"pixels_above_1", dj["pixels_above_1"]},
              {"max_count", dj["max_count"]}};
}

json stage_featurize(const ScanJob& job) {
  const auto& cfg = job.cfg();
  const FeatureSetSpec spec = parse_feature_set(cfg.feature_set);
  const PointCloud cloud = job.cloud();
  const ProjectionIndex index = job.index(cloud);
  DescriptorOptions dopt;
  dopt.radius = cfg.radius;
  dopt.workers = cfg.workers;
  const ScanRasters rasters = compute_scan_rasters(cloud, index, dopt);
  FeatureSetOptions fopt;
  fopt.stretch = cfg.stretch;
  fopt.ica.seed = cfg.seed;
  std::vector<ReductionModel> models;
  const FeatureCube cube = build_feature_set(rasters, spec, fopt, &models);

  const fs::path d = job.out(Stage::kFeaturize);
  save_fcub(cube, d / "features.fcub");
  write_valid(d / "valid.png", cube.valid());
  ensure_dir(d / "preview");
  for (const auto& ch : cube.channels()) png::write_gray8(d / "preview" / (ch.name + ".png"), to_gray8(ch.values, cube.valid()));
  for (const auto& m : models) save_model(m, d / (std::string(to_string(m.kind)) + ".json"));

  json r{{"scan", job.scan.id},
         {"feature_set", spec.name},
         {"channels", cube.names()},
         {"valid_pixels", cube.valid_count()}};
  if (cfg.write_tiles) {
    const TileSet tiles = tile(cube, cfg.n_tiles, cfg.tile_buffer);
    const fs::path td = d / "tiles";
    ensure_dir(td);
    json list = json::array();
    for (std::size_t t = 0; t < tiles.tiles.size(); ++t) {
      const Tile& tl = tiles.tiles[t];
      const std::string name = "tile_" + std::to_string(t) + ".fcub";
      save_fcub(tl.image, td / name);
      list.push_back({{"file", name},
                      {"core", {tl.core.row, tl.core.col, tl.core.height, tl.core.width}},
                      {"core_in_tile", {tl.core_in_tile.row, tl.core_in_tile.col, tl.core_in_tile.height,
                                        tl.core_in_tile.width}},
                      {"padded", {tl.padded.height, tl.padded.width}}});
    }
    write_text(td / "tiles.json", json{{"buffer", tiles.buffer}, {"tiles", list}}.dump(2));
    r["tiles"] = tiles.tiles.size();
  }
  return r;
}

FeatureCube nine_channel_cube(const FeatureCube& cube, const std::string& scan_id) {
  FeatureCube out(cube.height(), cube.width(), cube.valid());
  for (const char* name : kNineChannels) {
    const auto names = cube.names();
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw ConfigError("reduce: features of " + scan_id + " lack channel \"" + name +
                        "\"; featurize with a set containing IRZ_N3_CAP");
    out.add(name, cube.channel(std::string(name)));
  }
  return out;
}

FeatureCube vertical_concat(const std::vector<FeatureCube>& cubes) {
  std::size_t h = 0;
  const std::size_t w = cubes.front().width();
  for (const auto& c : cubes) {
    if (c.width() != w) throw DataError("reduce: scans have different grid widths");
    h += c.height();
  }
  BoolMask valid(h, w);
  std::size_t row = 0;
  for (const auto& c : cubes) {
    std::copy(c.valid().storage().begin(), c.valid().storage().end(), valid.storage().begin() + long(row * w));
    row += c.height();
  }
  FeatureCube out(h, w, valid);
  for (std::size_t k = 0; k < cubes.front().channel_count(); ++k) {
    RealMap m(h, w);
    row = 0;
    for (const auto& c : cubes) {
      const auto& src = c[k].storage();
      std::copy(src.begin(), src.end(), m.storage().begin() + long(row * w));
      row += c.height();
    }
    out.add(cubes.front().channel(k).name, std::move(m));
  }
  return out;
}

ReductionModel fit_kind(ReductionKind kind, const FeatureCube& cube, const PipelineConfig& cfg) {
  switch (kind) {
    case ReductionKind::kPca: return pca_fit(cube, cfg.reduce.components);
    case ReductionKind::kMnf: return mnf_fit(cube, cfg.reduce.components);
    case ReductionKind::kIca: {
      IcaOptions opt;
      opt.seed = cfg.seed;
      return ica_fit(cube, cfg.reduce.components, opt);
    }
  }
  throw InvariantError("reduce: unhandled kind");
}

LabelMask sample_training_mask(const LabelMask& gt, const BoolMask& valid, double fraction, std::size_t classes,
                               std::uint64_t seed) {
  std::vector<std::vector<std::uint32_t>> by_class(256);
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (valid[i] && gt[i] != kVoid && gt[i] < classes) by_class[gt[i]].push_back(static_cast<std::uint32_t>(i));
  Rng rng(seed);
  LabelMask mask(gt.height(), gt.width());
  for (std::size_t c = 1; c < by_class.size(); ++c) {
    auto& ids = by_class[c];
    if (ids.empty()) continue;
    const std::size_t take =
        std::min(ids.size(), std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(fraction * ids.size()))));
    for (std::size_t k = 0; k < take; ++k) {
      std::swap(ids[k], ids[k + rng.below(ids.size() - k)]);
      mask[ids[k]] = static_cast<std::uint8_t>(c);
    }
  }
  return mask;
}

LogitStack load_logit_files(const ScanJob& job, std::size_t h, std::size_t w) {
  std::vector<LogitStack> parts;
  std::vector<std::string> files;
  for (const auto& t : job.cfg().ensemble.logits) {
    files.push_back(replace_scan(t, job.scan.id));
    parts.push_back(load_lgts(files.back()));
  }
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = parts[k];
    const auto& q = parts.front();
    if (p.height() != h || p.width() != w)
      throw DataError("fuse: " + files[k] + " is " + std::to_string(p.height()) + "x" + std::to_string(p.width()) +
                      " but the grid is " + std::to_string(h) + "x" + std::to_string(w));
    if (p.classes() != q.classes())
      throw DataError("fuse: " + files[k] + " has " + std::to_string(p.classes()) + " classes but " + files[0] +
                      " has " + std::to_string(q.classes()));
  }
  return concat_models(parts);
}

json stage_fuse(const ScanJob& job) {
  const auto& cfg = job.cfg();
  const GridSpec grid = cfg.grid.spec();
  const FeatureCube features = job.features();
  if (features.height() != grid.height() || features.width() != grid.width())
    throw DataError("fuse: features of " + job.scan.id + " do not match the grid; rerun 'featurize'");
  LogitStack stack;
  json r{{"scan", job.scan.id}};
  if (cfg.ensemble.baseline) {
    LabelMask train;
    if (!cfg.ensemble.train_masks.empty()) {
      train = read_mask(replace_scan(cfg.ensemble.train_masks, job.scan.id), grid);
      r["training"] = "mask";
    } else {
      const fs::path gt = job.dir(Stage::kProject) / "gt.png";
      if (!fs::exists(gt))
        throw DataError("fuse: no labels in " + job.scan.path.string() +
                        " to sample a baseline training mask from; set ensemble.train_masks");
      train = sample_training_mask(read_mask(gt, grid), features.valid(), cfg.ensemble.train_fraction,
                                   cfg.ensemble.classes, job.seed());
      r["training"] = "sampled";
    }
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < train.size(); ++i) labeled += train[i] != kVoid && features.valid()[i];
    r["training_pixels"] = labeled;
    BaselineOptions opt;
    opt.classes = cfg.ensemble.classes;
    opt.forest.trees = cfg.ensemble.trees;
    opt.forest.max_depth = cfg.ensemble.max_depth;
    opt.workers = cfg.workers;
    stack = baseline_segment(features, train, cfg.ensemble.models, job.seed(), opt);
  } else if (!cfg.ensemble.logits.empty()) {
    stack = load_logit_files(job, grid.height(), grid.width());
  } else {
    throw ConfigError("fuse: set ensemble.logits or pass --baseline");
  }
  stack.check_finite();
  const FuseResult fused = fuse(stack, cfg.workers);
  const UncertaintyMaps u = uncertainty(stack, cfg.workers);
  const BoolMask& valid = features.valid();
  LabelMask labels = fused.labels;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!valid[i]) labels[i] = kVoid;

  const fs::path d = job.out(Stage::kFuse);
  png::write_gray8(d / "labels.png", labels);
  png::write_rgb8(d / "labels_color.png", colorize_labels(labels));
  FeatureCube ucube(grid.height(), grid.width(), valid);
  RealMap maps[3] = {u.total, u.expected, u.epistemic};
  for (auto& m : maps)
    for (std::size_t i = 0; i < m.size(); ++i)
      if (!valid[i]) m[i] = 0.0;
  ucube.add("total", maps[0]);
  ucube.add("expected", maps[1]);
  ucube.add("epistemic", maps[2]);
  save_fcub(ucube, d / "uncertainty.fcub");
  write_valid(d / "valid.png", valid);
  const double ln_c = std::log(double(stack.classes()));
  png::write_rgb8(d / "total.png", colorize_hot(maps[0], valid, ln_c));
  png::write_rgb8(d / "epistemic.png", colorize_hot(maps[2], valid, ln_c));
  if (cfg.ensemble.save_logits) save_lgts(stack, d / "logits.lgts");

  json stats;
  const char* names[3] = {"total", "expected", "epistemic"};
  for (int k = 0; k < 3; ++k) {
    double sum = 0, mx = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < valid.size(); ++i)
      if (valid[i]) {
        sum += maps[k][i];
        mx = std::max(mx, maps[k][i]);
        ++n;
      }
    stats[names[k]] = {{"mean", n ? sum / double(n) : 0.0},
                       {"max", mx},
                       {"map_entropy", n ? map_entropy(maps[k], &valid, cfg.eval.bins) : 0.0}};
  }
  json entropy{{"scan", job.scan.id}, {"models", stack.models()}, {"classes", stack.classes()},
               {"bins", cfg.eval.bins}, {"maps", stats}};
  write_text(d / "entropy.json", entropy.dump(2));
  r["models"] = stack.models();
  r["classes"] = stack.classes();
  r["mean_epistemic"] = stats["epistemic"]["mean"];
  r["mean_total"] = stats["total"]["mean"];
  return r;
}

json stage_backproject(const ScanJob& job) {
  PointCloud cloud = job.cloud();
  const ProjectionIndex index = job.index(cloud);
  const fs::path mask_path = job.dir(Stage::kFuse) / "labels.png";
  require_file(mask_path, "fuse");
  const auto labels = back_project(index, read_mask(mask_path, index.grid()));
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    cloud.points[i].label = labels[i];
    labeled += labels[i] != kVoid;
  }
  cloud.has_labels = true;
  const fs::path d = job.out(Stage::kRefine);
  save_ply(cloud, d / "backprojected.ply");
  return json{{"scan", job.scan.id}, {"points", cloud.size()}, {"labeled_points", labeled}};
}

json stage_refine(const ScanJob& job) {
  const auto& cfg = job.cfg();
  PointCloud cloud = job.cloud();
  const ProjectionIndex index = job.index(cloud);
  const fs::path mask_path = job.dir(Stage::kFuse) / "labels.png";
  require_file(mask_path, "fuse");
  const LabelMask mask = read_mask(mask_path, index.grid());

  RefinementConfig rc;
  rc.k_vote = cfg.refine.k_vote;
  rc.tau = cfg.refine.tau;
  rc.scales = cfg.refine.scales;
  rc.relabel_void = cfg.refine.relabel_void;
  rc.core_sample_per_class = cfg.refine.core_sample_per_class;
  rc.forest.trees = cfg.refine.trees;
  rc.forest.max_depth = cfg.refine.max_depth;
  rc.forest.seed = job.seed();
  rc.forest.workers = cfg.workers;
  rc.workers = cfg.workers;
  if (rc.k_vote >= cloud.size())
    throw DataError("refine: " + job.scan.id + " has " + std::to_string(cloud.size()) +
                    " points, too few for k_vote = " + std::to_string(rc.k_vote));
  const SpatialIndex spatial(cloud);
  const RefinementResult res = refine_labels(cloud, spatial, back_project(index, mask), cfg.ensemble.classes, rc);

  const fs::path d = job.out(Stage::kRefine);
  PointCloud out = cloud;
  for (std::size_t i = 0; i < out.size(); ++i) out.points[i].label = res.final_labels[i];
  out.has_labels = true;
  save_ply(out, d / "refined.ply");
  json report = json::parse(refinement_report_json(res));
  report["scan"] = job.scan.id;
  report["k_vote"] = rc.k_vote;
  report["tau"] = rc.tau;
  write_text(d / "report.json", report.dump(2));
  if (cfg.refine.reproject) {
    const LabelMask re = rasterize_labels(index, res.final_labels);
    png::write_gray8(d / "labels.png", re);
    png::write_rgb8(d / "labels_color.png", colorize_labels(re));
  } else {
    fs::remove(d / "labels.png");
    fs::remove(d / "labels_color.png");
  }
  return json{{"scan", job.scan.id},
              {"points", cloud.size()},
              {"core_set_size", res.core_size},
              {"suspect_set_size", res.suspects},
              {"forest_trained", res.forest_trained},
              {"forest_adoptions", res.forest_adoptions},
              {"total_changes", report["total_changes"]}};
}

json stage_sphere(const ScanJob& job) {
  const auto& cfg = job.cfg();
  const GridSpec grid = cfg.grid.spec();
  Image<Rgb> colors;
  if (cfg.sphere.source == "labels") {
    fs::path p = job.dir(Stage::kRefine) / "labels.png";
    if (!fs::exists(p)) p = job.dir(Stage::kFuse) / "labels.png";
    require_file(p, "fuse");
    colors = colorize_labels(read_mask(p, grid));
  } else {
    const FeatureCube cube = job.features();
    if (cube.height() != grid.height() || cube.width() != grid.width())
      throw DataError("sphere: features of " + job.scan.id + " do not match the grid; rerun 'featurize'");
    colors = Image<Rgb>(grid.height(), grid.width());
    for (std::size_t k = 0; k < 3 && k < cube.channel_count(); ++k) {
      const auto g = to_gray8(cube[k], cube.valid());
      for (std::size_t i = 0; i < g.size(); ++i) colors[i][k] = g[i];
    }
  }
  VirtualSphereSpec spec;
  spec.resolution_deg = cfg.sphere.resolution_deg;
  spec.radius = cfg.sphere.radius;
  spec.zenith_min_deg = cfg.sphere.zenith_min_deg;
  spec.zenith_max_deg = cfg.sphere.zenith_max_deg;
  spec.azimuth_min_deg = cfg.sphere.azimuth_min_deg;
  spec.azimuth_max_deg = cfg.sphere.azimuth_max_deg;
  const PointCloud sphere = virtual_sphere(colors, grid, spec);
  const fs::path d = job.out(Stage::kSphere);
  save_ply(sphere, d / "sphere.ply");
  return json{{"scan", job.scan.id}, {"points", sphere.size()}, {"source", cfg.sphere.source}};
}

struct EvalOutcome {
  json report;
  ConfusionMatrix pixels;
  ConfusionMatrix pixels_all;
  std::optional<double> auprc;
};

EvalOutcome evaluate_scan(const ScanJob& job) {
  const auto& cfg = job.cfg();
  const GridSpec grid = cfg.grid.spec();
  const fs::path gt_path = job.dir(Stage::kProject) / "gt.png";
  if (!fs::exists(gt_path))
    throw DataError("eval: missing ground truth " + gt_path.string() + " (the scan carries no labels or 'project' was not run)");
  const LabelMask gt = read_mask(gt_path, grid);

  fs::path pred_path;
  const fs::path refined = job.dir(Stage::kRefine) / "labels.png", fused = job.dir(Stage::kFuse) / "labels.png";
  if (cfg.eval.prediction == "refine")
    pred_path = refined;
  else if (cfg.eval.prediction == "fuse")
    pred_path = fused;
  else
    pred_path = fs::exists(refined) ? refined : fused;
  require_file(pred_path, pred_path == refined ? "refine" : "fuse");
  const LabelMask pred = read_mask(pred_path, grid);

  const std::size_t classes = cfg.ensemble.classes;
  EvalOutcome o;
  o.pixels = confusion(gt, pred, classes, cfg.eval.exclude);
  o.pixels_all = confusion(gt, pred, classes);
  json r{{"scan", job.scan.id}, {"prediction", pred_path.parent_path().filename().string()}};
  if (o.pixels.total() == 0) throw DataError("eval: no evaluable pixels in " + job.scan.id);
  r["pixels"] = metrics_json(metrics(o.pixels));
  r["pixels_with_void"] = metrics_json(metrics(o.pixels_all));
  r["confusion"] = confusion_json(o.pixels);

  const fs::path d = job.out(Stage::kEval);
  const fs::path ufile = job.dir(Stage::kFuse) / "uncertainty.fcub";
  if (fs::exists(ufile)) {
    const FeatureCube u = load_fcub(ufile);
    const RealMap& score = u.channel(cfg.eval.score);
    if (!score.same_shape(grid.height(), grid.width())) throw DataError("eval: uncertainty map does not match the grid");
    BoolMask errors(grid.height(), grid.width()), keep(grid.height(), grid.width());
    std::size_t positives = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool excluded = std::find(cfg.eval.exclude.begin(), cfg.eval.exclude.end(), gt[i]) != cfg.eval.exclude.end();
      keep[i] = !excluded;
      errors[i] = gt[i] != pred[i];
      positives += keep[i] && errors[i];
    }
    if (positives > 0) {
      const auto curve = pr_curve(score, errors, &keep);
      o.auprc = auprc(curve);
      write_pr_csv(curve, d / "pr.csv");
      r["auprc"] = *o.auprc;
      r["error_pixels"] = positives;
    } else {
      fs::remove(d / "pr.csv");
      r["auprc"] = nullptr;
      r["auprc_note"] = "no prediction errors to rank";
    }
    r["uncertainty_score"] = cfg.eval.score;
  } else {
    fs::remove(d / "pr.csv");
  }

  const fs::path refined_ply = job.dir(Stage::kRefine) / "refined.ply";
  if (fs::exists(refined_ply)) {
    const PointCloud truth = job.cloud();
    if (truth.has_labels) {
      const PointCloud ref = load_ply(refined_ply);
      if (ref.size() == truth.size()) {
        std::vector<std::uint8_t> a(truth.size()), b(truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
          a[i] = truth.points[i].label;
          b[i] = ref.points[i].label;
        }
        r["points"] = metrics_json(metrics(confusion(a, b, classes, cfg.eval.exclude)));
      }
    }
  }
  write_text(d / "metrics.json", r.dump(2));
  o.report = r;
  return o;
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// oAcc and mAcc over the evaluated (non-excluded) pixels; both mIoU columns
// from the matrix that keeps Void.
std::string table_row(const std::string& name, const Metrics& m, const Metrics& with_void,
                      const std::optional<double>& auprc) {
  const std::uint8_t void_id[] = {kVoid};
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s %8s %16s %8s\n", name.c_str(), fixed(m.oacc).c_str(),
                fixed(m.macc).c_str(), fixed(with_void.miou).c_str(),
                fixed(with_void.mean_iou_excluding(void_id)).c_str(), auprc ? fixed(*auprc).c_str() : "-");
  return buf;
}

}  // namespace

std::vector<ScanInput> discover_scans(const std::string& input) {
  std::vector<fs::path> paths;
  if (has_glob_chars(input)) {
    glob_t g{};
    const int rc = ::glob(input.c_str(), 0, nullptr, &g);
    if (rc == 0)
      for (std::size_t i = 0; i < g.gl_pathc; ++i)
        if (fs::is_regular_file(g.gl_pathv[i])) paths.emplace_back(g.gl_pathv[i]);
    globfree(&g);
  } else if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (e.is_regular_file() && ext == ".ply") paths.push_back(e.path());
    }
  } else if (fs::is_regular_file(input)) {
    paths.emplace_back(input);
  } else {
    throw DataError("no scans: " + input + " does not exist");
  }
  if (paths.empty()) throw DataError("no scans: 0 PLY files match " + input);
  std::sort(paths.begin(), paths.end());
  std::vector<ScanInput> scans;
  for (const auto& p : paths) {
    const std::string id = p.stem().string();
    for (const auto& s : scans)
      if (s.id == id) throw DataError("two scans share the id \"" + id + "\": " + s.path.string() + ", " + p.string());
    scans.push_back({id, p});
  }
  return scans;
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::kSynth: return "synth";
    case Stage::kProject: return "project";
    case Stage::kDensity: return "density";
    case Stage::kFeaturize: return "featurize";
    case Stage::kReduce: return "reduce";
    case Stage::kFuse: return "fuse";
    case Stage::kBackproject: return "backproject";
    case Stage::kRefine: return "refine";
    case Stage::kSphere: return "sphere";
    case Stage::kEval: return "eval";
    case Stage::kRun: return "run";
  }
  return "?";
}

std::vector<std::string> stage_names() {
  std::vector<std::string> out;
  for (Stage s : kAllStages) out.emplace_back(to_string(s));
  return out;
}

Stage parse_stage(const std::string& name) {
  for (Stage s : kAllStages)
    if (name == to_string(s)) return s;
  std::string known;
  for (const auto& n : stage_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown stage \"" + name + "\" (known: " + known + ")");
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

fs::path Pipeline::scan_dir(const std::string& scan_id) const { return fs::path(config_.output) / scan_id; }

fs::path Pipeline::stage_dir(const std::string& scan_id, Stage stage) const {
  // Back-projection writes next to the refinement outputs.
  if (stage == Stage::kBackproject) stage = Stage::kRefine;
  return scan_dir(scan_id) / to_string(stage);
}

std::string Pipeline::run(Stage stage) {
  const auto t0 = std::chrono::steady_clock::now();
  json report{{"stage", to_string(stage)}};

  if (stage == Stage::kRun) {
    json stages = json::array();
    for (Stage s : {Stage::kProject, Stage::kFeaturize, Stage::kFuse, Stage::kRefine, Stage::kSphere, Stage::kEval})
      stages.push_back(json::parse(run(s)));
    report["stages"] = stages;
    report["seconds"] = seconds_since(t0);
    return report.dump(2);
  }

  if (stage == Stage::kSynth) {
    if (has_glob_chars(config_.input)) throw ConfigError("synth: input must be a directory, not a pattern");
    ensure_dir(config_.input);
    const GridSpec grid = config_.grid.spec();
    json scans = json::array();
    for (std::size_t i = 0; i < config_.synth.count; ++i) {
      SceneSpec spec;
      spec.seed = config_.seed + i;
      spec.stems = config_.synth.stems;
      spec.intensity_noise = config_.synth.intensity_noise;
      spec.range_noise = config_.synth.range_noise;
      const PointCloud cloud = config_.synth.rays_per_pixel == 1
                                   ? synthetic_scan(grid, spec)
                                   : synthetic_scan(grid, spec, config_.synth.rays_per_pixel);
      char name[32];
      std::snprintf(name, sizeof name, "synth_%02zu.ply", i);
      save_ply(cloud, fs::path(config_.input) / name);
      scans.push_back({{"file", name}, {"points", cloud.size()}, {"seed", spec.seed}});
    }
    report["scans"] = scans;
    report["seconds"] = seconds_since(t0);
    return report.dump(2);
  }

  const auto scans = discover_scans(config_.input);
  ensure_dir(config_.output);
  json per_scan = json::array();

  if (stage == Stage::kReduce) {
    std::vector<FeatureCube> cubes;
    for (const auto& s : scans) cubes.push_back(nine_channel_cube(ScanJob{*this, s}.features(), s.id));
    for (const auto& kind_name : config_.reduce.kinds) {
      const ReductionKind kind = parse_reduction_kind(kind_name);
      std::optional<ReductionModel> corpus;
      if (config_.reduce.corpus) corpus = fit_kind(kind, vertical_concat(cubes), config_);
      for (std::size_t k = 0; k < scans.size(); ++k) {
        const ScanJob job{*this, scans[k]};
        const ReductionModel m = corpus ? *corpus : fit_kind(kind, cubes[k], config_);
        const fs::path d = job.out(Stage::kReduce);
        save_model(m, d / (std::string(to_string(kind)) + ".json"));
        const FeatureCube t = transform(m, cubes[k]);
        save_fcub(t, d / (std::string(to_string(kind)) + ".fcub"));
        for (const auto& ch : t.channels())
          png::write_gray8(d / (ch.name + ".png"), to_gray8(ch.values, t.valid()));
        json entry{{"scan", scans[k].id}, {"kind", to_string(kind)}, {"scope", corpus ? "corpus" : "scan"}};
        if (!m.explained.empty()) entry["explained"] = m.explained;
        if (kind == ReductionKind::kIca) entry["converged"] = m.converged;
        per_scan.push_back(entry);
      }
    }
    report["scans"] = per_scan;
    report["seconds"] = seconds_since(t0);
    return report.dump(2);
  }

  if (stage == Stage::kEval) {
    ConfusionMatrix total(config_.ensemble.classes), total_all(config_.ensemble.classes);
    std::string table;
    char head[160];
    std::snprintf(head, sizeof head, "%-24s %8s %8s %8s %16s %8s\n", "Scan", "oAcc", "mAcc", "mIoU",
                  "mIoU Void excl.", "AUPRC");
    table += head;
    std::vector<double> auprcs;
    for (const auto& s : scans) {
      const auto ts = std::chrono::steady_clock::now();
      EvalOutcome o = evaluate_scan(ScanJob{*this, s});
      o.report["seconds"] = seconds_since(ts);
      total += o.pixels;
      total_all += o.pixels_all;
      if (o.auprc) auprcs.push_back(*o.auprc);
      table += table_row(s.id, metrics(o.pixels), metrics(o.pixels_all), o.auprc);
      per_scan.push_back(o.report);
    }
    std::optional<double> mean_auprc;
    if (!auprcs.empty()) {
      double sum = 0;
      for (double v : auprcs) sum += v;
      mean_auprc = sum / double(auprcs.size());
    }
    table += table_row("ALL", metrics(total), metrics(total_all), mean_auprc);
    json aggregate{{"pixels", metrics_json(metrics(total))},
                   {"pixels_with_void", metrics_json(metrics(total_all))},
                   {"confusion", confusion_json(total)}};
    if (mean_auprc) aggregate["mean_auprc"] = *mean_auprc;
    report["scans"] = per_scan;
    report["aggregate"] = aggregate;
    write_text(fs::path(config_.output) / "eval_summary.json", json{{"scans", per_scan}, {"aggregate", aggregate}}.dump(2));
    write_text(fs::path(config_.output) / "eval_table.txt", table);
    report["seconds"] = seconds_since(t0);
    return report.dump(2);
  }

  for (const auto& s : scans) {
    const ScanJob job{*this, s};
    const auto ts = std::chrono::steady_clock::now();
    json r;
    switch (stage) {
      case Stage::kProject: r = stage_project(job); break;
      case Stage::kDensity: r = stage_density(job); break;
      case Stage::kFeaturize: r = stage_featurize(job); break;
      case Stage::kFuse: r = stage_fuse(job); break;
      case Stage::kBackproject: r = stage_backproject(job); break;
      case Stage::kRefine: r = stage_refine(job); break;
      case Stage::kSphere: r = stage_sphere(job); break;
      default: throw InvariantError("pipeline: unhandled stage");
    }
    r["seconds"] = seconds_since(ts);
    log::info(std::string(to_string(stage)) + " " + s.id + " done");
    per_scan.push_back(r);
  }
  report["scans"] = per_scan;
  report["seconds"] = seconds_since(t0);
  return report.dump(2);
}

}  // namespace lidarsphere
