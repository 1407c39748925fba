// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "common/rng.hpp"
#include "ensemble/ensemble.hpp"
#include "eval/metrics.hpp"
#include "features/descriptors.hpp"
#include "features/sym_eigen3.hpp"
#include "features/tiling.hpp"
#include "oracles.hpp"
#include "pipeline/config.hpp"
#include "pipeline/pipeline.hpp"
#include "pointcloud/ply.hpp"
#include "pointcloud/spatial_index.hpp"
#include "projection/spherical.hpp"
#include "refine/refinement.hpp"
#include "synth/synthetic.hpp"

using namespace lidarsphere;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

void expect(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + ("failed: " + what);
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("lidarsphere_accept_" + std::to_string(::getpid()) + "_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs `body` in a child process and reports its own peak resident set size.
struct ChildResult {
  bool ok = false;
  double peak_mb = 0;
  std::string message;
};

ChildResult in_child(const std::function<std::string()>& body) {
  int pipefd[2];
  if (::pipe(pipefd) != 0) return {false, 0, "pipe failed"};
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::close(pipefd[0]);
    int code = 0;
    std::string msg;
    try {
      msg = body();
    } catch (const std::exception& e) {
      msg = e.what();
      code = 1;
    }
    if (!msg.empty()) (void)!::write(pipefd[1], msg.data(), msg.size());
    ::close(pipefd[1]);
    std::_Exit(code);
  }
  ::close(pipefd[1]);
  std::string msg;
  char buf[512];
  ssize_t n;
  while ((n = ::read(pipefd[0], buf, sizeof buf)) > 0) msg.append(buf, std::size_t(n));
  ::close(pipefd[0]);
  int status = 0;
  struct rusage ru {};
  ::wait4(pid, &status, 0, &ru);
  return {WIFEXITED(status) && WEXITSTATUS(status) == 0, double(ru.ru_maxrss) / 1024.0, msg};
}

// 1
Outcome grid_constant() {
  Outcome o;
  const auto t0 = Clock::now();
  const GridSpec g = GridSpec::from_degrees(0.25, 0.0, 135.0, 0.0, 360.0);
  const double t = seconds_since(t0);
  expect(o, g.height() == 540 && g.width() == 1440, "grid is " + std::to_string(g.height()) + "x" + std::to_string(g.width()));
  expect(o, t < 1.0, "runtime");
  o.detail = std::to_string(g.height()) + "x" + std::to_string(g.width()) + ", " + fmt("%.4f s", t) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 2
Outcome density_validation() {
  Outcome o;
  const GridSpec g = GridSpec::cbl();
  const PointCloud shell = beam_aligned_shell(g, 12.0);
  const auto t0 = Clock::now();
  const auto d = density_map(project(shell, g));
  const double t = seconds_since(t0);
  expect(o, shell.size() == 777'600, "point count");
  expect(o, d.mode() == 1, "mode");
  expect(o, d.pixels_above(1) == 0, "pixels above 1");
  expect(o, t < 10.0, "runtime");
  o.detail = std::to_string(shell.size()) + " points, mode " + std::to_string(d.mode()) + ", " +
             std::to_string(d.pixels_above(1)) + " pixels > 1, " + fmt("%.2f s", t) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 3
Outcome virtual_sphere_constant() {
  Outcome o;
  const GridSpec g = GridSpec::cbl();
  const Image<Rgb> colors(g.height(), g.width(), Rgb{128, 128, 128});
  auto t0 = Clock::now();
  const std::size_t a = virtual_sphere(colors, g, VirtualSphereSpec{1.0, 1.0, 0.0, 135.0, 0.0, 360.0}).size();
  const double ta = seconds_since(t0);
  const GridSpec ring = GridSpec::from_degrees(0.2, 45.0, 136.0);
  const Image<Rgb> rc(ring.height(), ring.width(), Rgb{128, 128, 128});
  t0 = Clock::now();
  const std::size_t b = virtual_sphere(rc, ring, VirtualSphereSpec{0.2, 1.0, 45.0, 136.0, 0.0, 360.0}).size();
  const double tb = seconds_since(t0);
  expect(o, a == 48'600, "1 deg count");
  expect(o, b == 819'000, "0.2 deg ring count");
  expect(o, ta < 5.0 && tb < 5.0, "runtime");
  o.detail = std::to_string(a) + " and " + std::to_string(b) + " points, " + fmt("%.2f s", ta) + " / " +
             fmt("%.2f s", tb) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 4
Outcome descriptor_limits() {
  Outcome o;
  const double pi = std::numbers::pi;
  std::vector<Vec3> line, disk, ball;
  for (int i = -5; i <= 5; ++i) line.push_back({0.1 * i, 0, 0});
  disk.push_back({0, 0, 0});
  for (int ring = 1; ring <= 3; ++ring)
    for (int k = 0; k < 12; ++k) disk.push_back({0.1 * ring * std::cos(k * pi / 6), 0.1 * ring * std::sin(k * pi / 6), 0});
  ball.push_back({0, 0, 0});
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) ball.push_back({0.1 * sx, 0.1 * sy, 0.1 * sz});

  double worst = 0;
  auto check = [&](const std::vector<Vec3>& pts, double k, double a, double p) {
    const auto f = describe_neighborhood(pts.front(), std::span(pts).subspan(1), {0, 0, 10});
    worst = std::max({worst, std::abs(f.curvature - k), std::abs(f.anisotropy - a), std::abs(f.planarity - p)});
  };
  check(line, 0, 1, 0);
  check(disk, 0, 0, 1);
  check(ball, 1.0 / 3.0, 0, 0);
  expect(o, worst < 1e-9, "limit cases");

  Rng rng(2024);
  double eig_err = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Vec3> pts(5 + rng.below(60));
    const double sx = rng.uniform(0.01, 1), sy = rng.uniform(0.01, 1), sz = rng.uniform(0.001, 1);
    for (auto& p : pts) p = {sx * rng.normal(), sy * rng.normal(), sz * rng.normal()};
    const auto cov = covariance(pts);
    const auto want = oracle::char_poly_eigenvalues(cov);
    const auto got = sym_eigen3(cov);
    for (int k = 0; k < 3; ++k) eig_err = std::max(eig_err, std::abs(got.values[k] - want[k]));
  }
  expect(o, eig_err < 1e-9, "eigenvalue oracle");
  o.detail = "limit error " + fmt("%.1e", worst) + ", oracle error " + fmt("%.1e", eig_err) + " over 1000 trials" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 5
Outcome uncertainty_identities() {
  Outcome o;
  Rng rng(5);
  LogitStack same(4, 6, 8, 8);
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t p = 0; p < 64; ++p) {
      const double v = 3 * rng.normal();
      for (std::size_t m = 0; m < 4; ++m) same.at(m, c, p) = v;
    }
  double e_same = 0;
  const UncertaintyMaps us = uncertainty(same);
  for (double v : us.epistemic.storage()) e_same = std::max(e_same, std::abs(v));

  LogitStack opposed(2, 2, 1, 1);
  opposed.at(0, 0, 0) = 40;
  opposed.at(0, 1, 0) = -40;
  opposed.at(1, 0, 0) = -40;
  opposed.at(1, 1, 0) = 40;
  const auto u = uncertainty(opposed);
  const double ln2 = std::numbers::ln2;
  const double t_err = std::abs(u.total[0] - ln2), x_err = std::abs(u.expected[0]), e_err = std::abs(u.epistemic[0] - ln2);

  double uni = 0;
  const UncertaintyMaps uu = uncertainty(LogitStack(3, 6, 4, 4));
  for (double v : uu.total.storage()) uni = std::max(uni, std::abs(v - std::log(6.0)));

  expect(o, e_same < 1e-9, "identical members");
  expect(o, t_err < 1e-9 && x_err < 1e-9 && e_err < 1e-9, "opposed members");
  expect(o, uni < 1e-9, "uniform C=6");
  o.detail = "identical " + fmt("%.1e", e_same) + ", opposed total/expected/epistemic errors " + fmt("%.1e", t_err) + "/" +
             fmt("%.1e", x_err) + "/" + fmt("%.1e", e_err) + ", uniform " + fmt("%.1e", uni) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 6
Outcome metric_oracles() {
  Outcome o;
  double m_err = 0, pr_err = 0, ap_err = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t c = 2 + rng.below(11);
    ConfusionMatrix cm(c);
    std::vector<std::uint64_t> counts(c * c);
    for (std::size_t g = 0; g < c; ++g) {
      const bool empty_row = rng.uniform() < 0.15;
      for (std::size_t p = 0; p < c; ++p) counts[g * c + p] = cm.at(g, p) = empty_row ? 0 : rng.below(g == p ? 500 : 40);
    }
    if (cm.total() == 0) cm.at(0, 0) = counts[0] = 1;
    const auto m = metrics(cm);
    const auto n = oracle::naive_metrics(counts, c);
    m_err = std::max({m_err, std::abs(m.oacc - n.oacc), std::abs(m.macc - n.macc), std::abs(m.miou - n.miou)});
    for (std::size_t k = 0; k < c; ++k) {
      if (m.iou[k].has_value() == std::isnan(n.iou[k])) m_err = 1;
      if (m.iou[k]) m_err = std::max(m_err, std::abs(*m.iou[k] - n.iou[k]));
    }

    const std::size_t len = 50 + rng.below(400);
    std::vector<double> s(len);
    std::vector<std::uint8_t> e(len);
    for (std::size_t i = 0; i < len; ++i) {
      s[i] = double(rng.below(60)) / 60.0;
      e[i] = rng.uniform() < 0.1 + 0.6 * s[i];
    }
    e[0] = 1;
    const auto curve = pr_curve(s, e);
    const auto ref = oracle::naive_pr(s, e);
    if (curve.size() != ref.size() + 1) {
      pr_err = 1;
      continue;
    }
    for (std::size_t j = 0; j < ref.size(); ++j)
      pr_err = std::max({pr_err, std::abs(curve[j + 1].precision - ref[j].precision),
                         std::abs(curve[j + 1].recall - ref[j].recall),
                         curve[j + 1].threshold == ref[j].threshold ? 0.0 : 1.0});
    ap_err = std::max(ap_err, std::abs(auprc(curve) - oracle::naive_auprc(ref)));
  }
  std::vector<double> s{0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
  std::vector<std::uint8_t> e{1, 1, 1, 0, 0, 0};
  const double perfect = auprc(pr_curve(s, e));
  expect(o, m_err < 1e-10, "metrics oracle");
  expect(o, pr_err < 1e-10, "pr oracle");
  expect(o, ap_err < 1e-10, "auprc oracle");
  expect(o, perfect == 1.0, "perfect ranking");
  o.detail = "100 instances, metric error " + fmt("%.1e", m_err) + ", pr error " + fmt("%.1e", pr_err) +
             ", auprc error " + fmt("%.1e", ap_err) + ", perfect AUPRC " + fmt("%.17g", perfect) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 7
Outcome loss_identities() {
  Outcome o;
  const double d13 = dice_loss(std::vector<double>{1, 1, 0, 0}, std::vector<std::uint8_t>{1, 0, 0, 0});
  LabelMask gt(3, 4);
  ProbabilityMap p{4, 3, 4, std::vector<double>(4 * 12, 0.0)};
  for (std::size_t i = 0; i < 12; ++i) {
    gt[i] = std::uint8_t(i % 4);
    p.data[(i % 4) * 12 + i] = 1.0;
  }
  const double dice0 = dice_loss(p, gt), ce0 = cross_entropy_loss(p, gt);
  expect(o, std::abs(d13 - 1.0 / 3.0) < 1e-12, "dice 1/3");
  expect(o, dice0 == 0.0, "dice on perfect prediction");
  expect(o, ce0 == 0.0, "cross entropy on perfect prediction");
  o.detail = "dice case " + fmt("%.15f", d13) + ", perfect dice " + fmt("%g", dice0) + ", perfect CE " + fmt("%g", ce0) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// Flips `fraction` of the valid pixels of a two-class mask, sampled from the
// narrowest band around the class boundary holding twice that many pixels.
LabelMask boundary_noise(const LabelMask& clean, std::uint8_t a, std::uint8_t b, double fraction, std::uint64_t seed) {
  const std::size_t h = clean.height(), w = clean.width();
  std::vector<int> dist(h * w, -1);
  std::deque<std::size_t> queue;
  std::size_t valid = 0;
  auto neighbors = [&](std::size_t i, auto&& fn) {
    const std::size_t r = i / w, c = i % w;
    if (r > 0) fn(i - w);
    if (r + 1 < h) fn(i + w);
    fn(r * w + (c + w - 1) % w);
    fn(r * w + (c + 1) % w);
  };
  for (std::size_t i = 0; i < h * w; ++i) {
    if (clean[i] == 0) continue;
    ++valid;
    bool edge = false;
    neighbors(i, [&](std::size_t j) { edge |= clean[j] != 0 && clean[j] != clean[i]; });
    if (edge) {
      dist[i] = 0;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    neighbors(i, [&](std::size_t j) {
      if (clean[j] != 0 && dist[j] < 0) {
        dist[j] = dist[i] + 1;
        queue.push_back(j);
      }
    });
  }
  const std::size_t target = std::size_t(std::llround(fraction * double(valid)));
  std::vector<std::size_t> band;
  for (int d = 0; band.size() < 2 * target; ++d) {
    bool any = false;
    for (std::size_t i = 0; i < h * w; ++i)
      if (dist[i] == d) {
        band.push_back(i);
        any = true;
      }
    if (!any) break;
  }
  Rng rng(seed);
  for (std::size_t k = 0; k < std::min(target, band.size()); ++k) std::swap(band[k], band[k + rng.below(band.size() - k)]);
  LabelMask noisy = clean;
  for (std::size_t k = 0; k < std::min(target, band.size()); ++k) noisy[band[k]] = noisy[band[k]] == a ? b : a;
  return noisy;
}

// 8
Outcome stage3_contract() {
  Outcome o;
  const auto t0 = Clock::now();
  const GridSpec g = GridSpec::cbl();
  SceneSpec scene;
  scene.seed = 8;
  scene.canopy = false;
  scene.roots = false;
  scene.object = false;
  const PointCloud cloud = synthetic_scan(g, scene);
  std::vector<std::uint8_t> truth;
  std::set<std::uint8_t> classes;
  for (const auto& p : cloud.points) {
    truth.push_back(p.label);
    classes.insert(p.label);
  }
  if (classes.size() != 2) {
    expect(o, false, "scene has " + std::to_string(classes.size()) + " classes");
    return o;
  }
  const std::uint8_t ca = *classes.begin(), cb = *classes.rbegin();
  const ProjectionIndex index = project(cloud, g);
  const LabelMask noisy = boundary_noise(rasterize_labels(index, truth), ca, cb, 0.05, 88);

  RefinementConfig cfg;
  cfg.tau = 0.8;
  auto errors = [&](const std::vector<std::uint8_t>& y) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < y.size(); ++i) n += y[i] != truth[i];
    return n;
  };
  const RefinementResult r = refine_labels(cloud, index, noisy, 6, cfg);
  const std::size_t before = errors(r.back_projected), after = errors(r.final_labels);
  std::size_t core_changed = 0;
  for (auto id : core_set(r.back_projected, r.smoothed)) core_changed += r.final_labels[id] != r.back_projected[id];
  RefinementConfig one = cfg;
  one.workers = 1;
  const RefinementResult again = refine_labels(cloud, index, noisy, 6, one);
  const double t = seconds_since(t0);

  expect(o, after < before, "error count not reduced");
  expect(o, core_changed == 0, "core labels changed");
  expect(o, again.final_labels == r.final_labels, "not reproducible");
  expect(o, t < 60.0, "runtime");
  o.detail = std::to_string(cloud.size()) + " points, errors " + std::to_string(before) + " -> " + std::to_string(after) +
             ", core " + std::to_string(r.core_size) + " unchanged " + (core_changed == 0 ? "yes" : "no") +
             ", forest adoptions " + std::to_string(r.forest_adoptions) + ", reproducible " +
             (again.final_labels == r.final_labels ? "yes" : "no") + ", " + fmt("%.1f s", t) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 9
Outcome round_trips() {
  Outcome o;
  const GridSpec g = GridSpec::cbl();
  SceneSpec scene;
  scene.seed = 9;
  const PointCloud scan = synthetic_scan(g, scene);
  std::vector<std::uint8_t> labels;
  for (const auto& p : scan.points) labels.push_back(p.label);
  const auto idx = project(scan, g);
  const auto back = back_project(idx, rasterize_labels(idx, labels));
  std::size_t same = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) same += back[i] == labels[i];
  expect(o, density_map(idx).pixels_above(1) == 0, "scan is not one point per pixel");
  expect(o, same == labels.size(), "labels recovered");

  Rng rng(99);
  std::size_t identical = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    const std::size_t h = 1 + rng.below(120), w = 3 + rng.below(400), ch = 1 + rng.below(4);
    FeatureCube cube(h, w, BoolMask(h, w, true));
    for (std::size_t k = 0; k < ch; ++k) {
      RealMap m(h, w);
      for (auto& v : m.storage()) v = rng.normal();
      cube.add("c" + std::to_string(k), std::move(m));
    }
    const TileSet ts = tile(cube, 1 + rng.below(std::min<std::size_t>(w, 8)), rng.below(48));
    std::vector<FeatureCube> parts;
    for (const auto& tl : ts.tiles) parts.push_back(tl.image);
    const FeatureCube merged = merge_tile_cubes(ts, parts);
    bool eq = merged.channel_count() == ch;
    for (std::size_t k = 0; eq && k < ch; ++k) eq = merged[k] == cube[k];
    identical += eq;
  }
  expect(o, identical == trials, "tile merge identity");
  o.detail = std::to_string(same) + "/" + std::to_string(labels.size()) + " labels recovered, " +
             std::to_string(identical) + "/" + std::to_string(trials) + " random cubes merge to identity" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 10
Outcome performance_floor() {
  Outcome o;
  double elapsed = 0;
  const ChildResult child = in_child([&] {
    const fs::path dir = scratch("perf");
    const GridSpec g = GridSpec::cbl();
    SceneSpec scene;
    scene.seed = 10;
    save_ply(synthetic_scan_points(g, scene, 1'000'000), dir / "scans/million.ply");
    PipelineConfig cfg;
    cfg.input = (dir / "scans").string();
    cfg.output = (dir / "out").string();
    cfg.write_tiles = true;
    Pipeline p(cfg);
    const auto t0 = Clock::now();
    p.run(Stage::kProject);
    const json feat = json::parse(p.run(Stage::kFeaturize));
    const double t = seconds_since(t0);
    const std::size_t channels = feat["scans"][0]["channels"].size();
    const bool tiles = fs::exists(dir / "out/million/featurize/tiles/tiles.json");
    fs::remove_all(dir);
    return fmt("%.3f", t) + " " + std::to_string(channels) + " " + (tiles ? "1" : "0");
  });
  if (!child.ok) {
    expect(o, false, child.message);
    return o;
  }
  std::istringstream in(child.message);
  std::size_t channels = 0;
  int tiles = 0;
  in >> elapsed >> channels >> tiles;
  expect(o, channels == 9, "channel count");
  expect(o, tiles == 1, "tiles written");
  expect(o, elapsed < 120.0, "runtime");
  expect(o, child.peak_mb < 4096.0, "peak memory");
  o.detail = "1000000 points, " + std::to_string(channels) + " channels, " + fmt("%.1f s", elapsed) + ", peak " +
             fmt("%.0f MB", child.peak_mb) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 11
Outcome end_to_end(const std::string& cli) {
  Outcome o;
  const fs::path dir = scratch("e2e");
  {
    std::ofstream cfg(dir / "config.json");
    cfg << json{{"version", 1}, {"synth", {{"count", 3}}}}.dump(2);
  }
  const std::string common = " --config " + (dir / "config.json").string() + " --scan " + (dir / "scans").string() +
                             " --out " + (dir / "out").string() + " --quiet > " + (dir / "log.txt").string() + " 2>&1";
  const auto t0 = Clock::now();
  const int synth = std::system((cli + " synth" + common).c_str());
  const int run = synth == 0 ? std::system((cli + " run --baseline" + common).c_str()) : -1;
  const double t = seconds_since(t0);
  struct rusage ru {};
  ::getrusage(RUSAGE_CHILDREN, &ru);
  double oacc = 0;
  std::size_t scans = 0;
  if (run == 0) {
    std::ifstream in(dir / "out/eval_summary.json");
    const json s = json::parse(in);
    oacc = s["aggregate"]["pixels"]["oAcc"].get<double>();
    scans = s["scans"].size();
  } else {
    std::ifstream in(dir / "log.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    o.detail = ss.str();
  }
  expect(o, run == 0, "CLI exit status");
  expect(o, scans == 3, "scan count");
  expect(o, oacc >= 0.95, "oAcc");
  expect(o, t < 300.0, "runtime");
  o.detail = std::to_string(scans) + " scans, oAcc " + fmt("%.4f", oacc) + ", " + fmt("%.1f s", t) + ", peak " +
             fmt("%.0f MB", double(ru.ru_maxrss) / 1024.0) + (o.detail.empty() ? "" : "; " + o.detail);
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli = LIDARSPHERE_CLI;
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the lidarsphere executable");
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"grid constant", grid_constant},
      {"density validation", density_validation},
      {"virtual sphere constant", virtual_sphere_constant},
      {"descriptor limits and eigen oracle", descriptor_limits},
      {"uncertainty identities", uncertainty_identities},
      {"metric and PR oracles", metric_oracles},
      {"loss identities", loss_identities},
      {"refinement contract", stage3_contract},
      {"label and tile round trips", round_trips},
      {"performance floor", performance_floor},
      {"end-to-end CLI", [&] { return end_to_end(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), int(i + 1)) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
