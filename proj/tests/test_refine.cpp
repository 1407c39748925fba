#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "refine/forest.hpp"
#include "refine/refinement.hpp"
#include "test_util.hpp"

using namespace lidarsphere;

namespace {

struct Blobs {
  std::vector<double> x;
  std::vector<std::uint8_t> y;
};

// Class c is centered at (3c, -3c) in the first two of `dim` features.
Blobs blobs(const std::vector<std::size_t>& counts, std::size_t dim, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (std::size_t i = 0; i < counts[c]; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double center = d == 0 ? 3.0 * double(c) : d == 1 ? -3.0 * double(c) : 0.0;
        b.x.push_back(center + spread * rng.normal());
      }
      b.y.push_back(std::uint8_t(c));
    }
  return b;
}

// Brute-force simultaneous vote with the documented tie rules.
std::vector<std::uint8_t> vote_oracle(const PointCloud& cloud, const std::vector<std::uint8_t>& y, std::size_t k) {
  std::vector<std::uint8_t> out = y;
  const std::size_t n = cloud.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] == 0) continue;
    std::vector<std::pair<double, std::uint32_t>> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = double(cloud.points[j].x) - cloud.points[i].x;
      const double dy = double(cloud.points[j].y) - cloud.points[i].y;
      const double dz = double(cloud.points[j].z) - cloud.points[i].z;
      d.emplace_back(std::sqrt(dx * dx + dy * dy + dz * dz), std::uint32_t(j));
    }
    std::sort(d.begin(), d.end());
    std::vector<int> count(256, 0);
    std::vector<double> weight(256, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      const auto c = y[d[t].second];
      if (c == 0) continue;
      ++count[c];
      weight[c] += 1.0 / std::max(d[t].first, 1e-12);
    }
    int best = -1;
    for (int c = 1; c < 256; ++c) {
      if (count[c] == 0) continue;
      if (best < 0 || count[c] > count[best] || (count[c] == count[best] && weight[c] > weight[best] + 1e-9))
        best = c;
    }
    if (best > 0) out[i] = std::uint8_t(best);
  }
  return out;
}

PointCloud line_cloud(std::size_t n) {
  PointCloud c;
  c.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.points[i].x = float(i);
  return c;
}

}  // namespace

TEST_CASE("forest separates blobs and is deterministic") {
  const Blobs b = blobs({300, 300, 300}, 4, 0.5, 1);
  const FeatureRows rows{b.x, 4};
  ForestOptions opt;
  opt.trees = 30;
  const auto f = RandomForest::train(rows, b.y, 3, opt);
  CHECK(f.num_classes() == 3);
  CHECK(f.dim() == 4);
  CHECK(f.tree_count() == 30);
  const auto p = f.predict_proba(rows);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double sum = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(p[i * 3 + c] >= 0.0);
      sum += p[i * 3 + c];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    hit += std::max_element(p.begin() + long(i * 3), p.begin() + long(i * 3 + 3)) - (p.begin() + long(i * 3)) ==
           b.y[i];
  }
  CHECK(double(hit) / double(rows.rows()) >= 0.99);

  const Blobs probe = blobs({50, 50, 50}, 4, 2.0, 2);
  const FeatureRows probe_rows{probe.x, 4};
  const auto again = RandomForest::train(rows, b.y, 3, opt);
  CHECK(again.predict_proba(probe_rows, 1) == f.predict_proba(probe_rows, 4));
  opt.workers = 1;
  CHECK(RandomForest::train(rows, b.y, 3, opt).predict_proba(probe_rows) == f.predict_proba(probe_rows));

  std::vector<std::uint32_t> votes(3);
  f.predict_votes(probe_rows.row(0), votes);
  CHECK(votes[0] + votes[1] + votes[2] == 30);
}

TEST_CASE("balanced bootstrap keeps the minority class") {
  const Blobs b = blobs({9900, 100}, 3, 1.0, 3);
  const FeatureRows rows{b.x, 3};
  ForestOptions opt;
  opt.trees = 25;
  const auto f = RandomForest::train(rows, b.y, 2, opt);
  const auto p = f.predict_proba(rows);
  std::size_t tp = 0;
  for (std::size_t i = 9900; i < 10000; ++i) tp += p[i * 2 + 1] > p[i * 2];
  CHECK(double(tp) / 100.0 >= 0.95);
}

TEST_CASE("forest errors") {
  const Blobs b = blobs({20, 20}, 2, 0.5, 4);
  const FeatureRows rows{b.x, 2};
  const std::vector<std::uint8_t> one(40, 1);
  CHECK_THROWS_AS(RandomForest::train(rows, one, 2, {}), DataError);
  CHECK_THROWS_AS(RandomForest::train(rows, std::vector<std::uint8_t>(39, 0), 2, {}), InvalidArgument);
  auto bad = b.y;
  bad[0] = 5;
  CHECK_THROWS_AS(RandomForest::train(rows, bad, 2, {}), InvalidArgument);
}

TEST_CASE("knn_smooth examples") {
  // Five class-1 points around a class-2 point.
  PointCloud c;
  c.points = {{0, 0, 0, 0, 2}, {1, 0, 0, 0, 1}, {-1, 0, 0, 0, 1}, {0, 1, 0, 0, 1}, {0, -1, 0, 0, 1}, {0, 0, 1, 0, 1}};
  std::vector<std::uint8_t> y{2, 1, 1, 1, 1, 1};
  const SpatialIndex idx(c);
  const auto s = knn_smooth(y, idx, 5);
  CHECK(s == std::vector<std::uint8_t>(6, 1));

  const std::vector<std::uint8_t> flat(6, 3);
  CHECK(knn_smooth(flat, idx, 5) == flat);
  CHECK_THROWS_AS(knn_smooth(flat, idx, 6), InvalidArgument);

  std::vector<std::uint8_t> with_void{0, 1, 1, 1, 1, 1};
  CHECK(knn_smooth(with_void, idx, 5)[0] == 0);
  std::vector<std::uint8_t> void_around{2, 0, 0, 0, 0, 0};
  CHECK(knn_smooth(void_around, idx, 5)[0] == 2);
}

TEST_CASE("knn_smooth on an alternating chain") {
  const PointCloud c = line_cloud(12);
  std::vector<std::uint8_t> y(12);
  for (std::size_t i = 0; i < 12; ++i) y[i] = std::uint8_t(1 + i % 2);
  const SpatialIndex idx(c);
  const auto s = knn_smooth(y, idx, 2);
  CHECK(s == vote_oracle(c, y, 2));
  // Interior points see two neighbors of the other class.
  for (std::size_t i = 1; i + 1 < 12; ++i) CHECK(s[i] == y[i - 1]);
}

TEST_CASE("knn_smooth matches a brute-force vote") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 200 + 160 * seed;
    PointCloud c = lstest::random_cloud(n, seed + 50, 2.0);
    Rng rng(seed);
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = std::uint8_t(rng.below(5));
    const SpatialIndex idx(c);
    for (std::size_t k : {3u, 5u, 9u}) {
      CHECK(knn_smooth(y, idx, k, 1) == vote_oracle(c, y, k));
      CHECK(knn_smooth(y, idx, k, 3) == knn_smooth(y, idx, k, 1));
    }
  }
}

TEST_CASE("core and suspect sets") {
  const std::vector<std::uint8_t> y{1, 2, 0, 3}, yh{1, 3, 0, 3};
  CHECK(core_set(y, yh) == std::vector<std::uint32_t>{0, 3});
  CHECK(suspect_set(y, yh) == std::vector<std::uint32_t>{1});
  CHECK(suspect_set(y, yh, true) == std::vector<std::uint32_t>{1, 2});
  CHECK(core_set(y, y).size() == 3);
  const std::vector<std::uint8_t> voids(5, 0);
  CHECK(core_set(voids, voids).empty());
  CHECK_THROWS_AS(core_set(y, voids), InvalidArgument);
}

TEST_CASE("point features") {
  PointCloud plane;
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 100; ++j) {
      Point3 p;
      p.x = float(2.0 + 0.02 * i);
      p.y = float(-1.0 + 0.02 * j);
      p.z = -1.6f;
      p.intensity = 100.0f;
      plane.points.push_back(p);
    }
  const SpatialIndex idx(plane);
  const std::vector<double> scales{0.05, 0.15, 0.30};
  const auto f = point_features(plane, idx, scales);
  const std::size_t dim = point_feature_dim(3);
  CHECK(dim == 15);
  CHECK(point_feature_dim(2) == 12);
  REQUIRE(f.size() == plane.size() * dim);
  const std::size_t center = 50 * 100 + 50;
  const double* row = f.data() + center * dim;
  CHECK(row[0] == doctest::Approx(0.0));
  CHECK(row[1] == doctest::Approx(std::hypot(3.0, 0.0, -1.6)).epsilon(1e-5));
  CHECK(row[2] == 100.0);
  CHECK(std::abs(row[5]) > 0.999);
  for (std::size_t s = 0; s < 3; ++s) CHECK(row[6 + 3 * s + 2] > 0.95);
  CHECK(f == point_features(plane, idx, scales, 3));

  PointCloud twins = lstest::random_cloud(200, 9);
  twins.points[7] = twins.points[3];
  const SpatialIndex tidx(twins);
  const auto g = point_features(twins, tidx, scales);
  CHECK(std::equal(g.begin() + 3 * 15, g.begin() + 4 * 15, g.begin() + 7 * 15));
}

TEST_CASE("rf_relabel threshold branches") {
  const Blobs b = blobs({200, 200, 200}, 2, 1.4, 10);
  const FeatureRows rows{b.x, 2};
  ForestOptions opt;
  opt.trees = 20;
  opt.max_depth = 3;
  const auto f = RandomForest::train(rows, b.y, 3, opt);
  const auto p = f.predict_proba(rows);

  // Find a point whose top probability lies strictly inside (0, 1).
  std::size_t probe = rows.rows();
  double top = 0;
  std::size_t top_class = 0;
  for (std::size_t i = 0; i < rows.rows() && probe == rows.rows(); ++i) {
    const auto it = std::max_element(p.begin() + long(i * 3), p.begin() + long(i * 3 + 3));
    if (*it < 0.95 && *it > 0.4) {
      probe = i;
      top = *it;
      top_class = std::size_t(it - (p.begin() + long(i * 3)));
    }
  }
  REQUIRE(probe < rows.rows());
  std::vector<std::uint8_t> yh(rows.rows(), std::uint8_t((top_class + 1) % 3));
  const std::vector<std::uint32_t> suspects{std::uint32_t(probe)};

  const auto adopt = rf_relabel(f, suspects, rows, yh, top);
  CHECK(adopt.labels[probe] == top_class);
  CHECK(adopt.adoptions == 1);
  CHECK(adopt.changed == 1);
  const auto keep = rf_relabel(f, suspects, rows, yh, std::nextafter(top, 2.0));
  CHECK(keep.labels == yh);
  CHECK(keep.adoptions == 0);

  // Only suspects move.
  std::vector<std::uint32_t> half;
  for (std::uint32_t i = 0; i < rows.rows(); i += 2) half.push_back(i);
  const auto r = rf_relabel(f, half, rows, yh, 0.5);
  for (std::size_t i = 1; i < rows.rows(); i += 2) CHECK(r.labels[i] == yh[i]);

  std::vector<std::uint32_t> all(rows.rows());
  for (std::uint32_t i = 0; i < rows.rows(); ++i) all[i] = i;
  std::vector<std::uint32_t> uncertain;
  for (std::uint32_t i = 0; i < rows.rows(); ++i)
    if (*std::max_element(p.begin() + long(i * 3), p.begin() + long(i * 3 + 3)) < 1.0) uncertain.push_back(i);
  CHECK(rf_relabel(f, uncertain, rows, yh, 1.0).labels == yh);

  const std::vector<double> wide(rows.rows() * 3, 0.0);
  CHECK_THROWS_AS(rf_relabel(f, suspects, FeatureRows{wide, 3}, yh, 0.8), InvalidArgument);
  CHECK_THROWS_AS(rf_relabel(f, suspects, rows, yh, 0.0), InvalidArgument);
}

TEST_CASE("refinement pipeline keeps the core fixed") {
  // Two labeled slabs with a few mislabeled points.
  PointCloud c;
  Rng rng(12);
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 3000; ++i) {
    Point3 p;
    p.x = float(rng.uniform(2, 6));
    p.y = float(rng.uniform(-2, 2));
    const bool top = rng.uniform() < 0.5;
    p.z = float(top ? rng.uniform(0.5, 1.5) : rng.uniform(-1.6, -1.5));
    p.intensity = top ? 500.0f : 150.0f;
    std::uint8_t lab = top ? 3 : 1;
    if (rng.uniform() < 0.03) lab = top ? 1 : 3;
    if (rng.uniform() < 0.02) lab = 0;
    c.points.push_back(p);
    y.push_back(lab);
  }
  const SpatialIndex idx(c);
  RefinementConfig cfg;
  cfg.forest.trees = 20;
  const auto r = refine_labels(c, idx, y, 6, cfg);
  CHECK(r.forest_trained);
  const auto core = core_set(r.back_projected, r.smoothed);
  CHECK(r.core_size == core.size());
  for (auto id : core) CHECK(r.final_labels[id] == y[id]);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == 0) CHECK(r.final_labels[i] == 0);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] != 0) wrong += r.final_labels[i] != (c.points[i].z > 0 ? 3 : 1);
  CHECK(wrong < 10);
  const std::string report = refinement_report_json(r);
  CHECK(report.find("\"suspect_set_size\"") != std::string::npos);

  const std::vector<std::uint8_t> same(3000, 2);
  const auto u = refine_labels(c, idx, same, 6, cfg);
  CHECK(u.final_labels == same);
  CHECK_FALSE(u.forest_trained);
  CHECK(u.forest_changes == 0);

  RefinementConfig bad;
  bad.tau = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = {};
  bad.k_vote = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
