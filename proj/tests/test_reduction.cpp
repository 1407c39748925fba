#include <doctest.h>

#include <cmath>

#include "common/error.hpp"
#include "oracles.hpp"
#include "reduction/reduction.hpp"
#include "test_util.hpp"

using namespace lidarsphere;

namespace {

FeatureCube cube_from(const std::vector<RealMap>& maps) {
  FeatureCube c(maps[0].height(), maps[0].width(), BoolMask(maps[0].height(), maps[0].width(), 1));
  for (std::size_t k = 0; k < maps.size(); ++k) c.add("c" + std::to_string(k), maps[k]);
  return c;
}

double col_abs_dot(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::VectorXd& v) {
  return std::abs(a.col(i).dot(v));
}

double correlation(const RealMap& a, const RealMap& b) { return oracle::pearson(a.storage(), b.storage()); }

// Cube whose horizontal-difference covariance is exactly isotropic: signal is
// constant along each row; odd columns add +-sigma along one axis in a balanced
// cycle.
FeatureCube isotropic_noise_cube(std::uint64_t seed) {
  const std::size_t h = 200, w = 25;
  Rng rng(seed);
  std::vector<RealMap> maps(3, RealMap(h, w));
  const double c = std::cos(0.4), s = std::sin(0.4);
  for (std::size_t r = 0; r < h; ++r) {
    const double a = 3 * rng.normal(), b = 2 * rng.normal(), d = rng.normal();
    const double sig[3] = {c * a - s * b, s * a + c * b, d};
    for (std::size_t col = 0; col < w; ++col) {
      for (int k = 0; k < 3; ++k) maps[k](r, col) = sig[k];
      if (col % 2 == 1) {
        const std::size_t m = col / 2;
        const int k = static_cast<int>(m % 3);
        maps[k](r, col) += ((m / 3) % 2 ? -0.1 : 0.1);
      }
    }
  }
  return cube_from(maps);
}

}  // namespace

TEST_CASE("pca on identical channels is rank one") {
  Rng rng(1);
  RealMap a(20, 20);
  for (auto& v : a.storage()) v = rng.uniform();
  const FeatureCube cube = cube_from({a, a, a});
  const auto m = pca_fit(cube, 1);
  const Eigen::MatrixXd x = valid_pixel_matrix(cube);
  const Eigen::MatrixXd cx = x.rowwise() - x.colwise().mean();
  const double total = (cx.transpose() * cx).trace() / double(x.rows() - 1);
  CHECK(m.explained[0] / total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(pca_fit(cube, 3), doctest::Contains("rank 1"), DataError);
}

TEST_CASE("pca matches a brute-force covariance eigen-decomposition") {
  Rng rng(2);
  RealMap a(60, 60), b(60, 60), c(60, 60);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 2.0 * rng.normal();
    b[i] = std::sqrt(2.0) * rng.normal();
    c[i] = rng.normal();
  }
  const FeatureCube cube = cube_from({a, b, c});
  const auto m = pca_fit(cube, 3);

  // Oracle: loop covariance, characteristic-polynomial eigenvalues, null-space vectors.
  const std::vector<const RealMap*> ch{&a, &b, &c};
  double mean[3] = {};
  const double n = double(a.size());
  for (int k = 0; k < 3; ++k) {
    for (double v : ch[k]->storage()) mean[k] += v;
    mean[k] /= n;
  }
  oracle::Mat3 cov{};
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < a.size(); ++i) cov[r][s] += ((*ch[r])[i] - mean[r]) * ((*ch[s])[i] - mean[s]);
      cov[r][s] /= n - 1;
    }
  const auto ev = oracle::char_poly_eigenvalues(cov);
  for (int j = 0; j < 3; ++j) {
    const double lambda = ev[2 - j];
    CHECK(m.explained[j] == doctest::Approx(lambda).epsilon(1e-10));
    const Eigen::Vector3d r0(cov[0][0] - lambda, cov[0][1], cov[0][2]);
    const Eigen::Vector3d r1(cov[1][0], cov[1][1] - lambda, cov[1][2]);
    const Eigen::Vector3d v = r0.cross(r1).normalized();
    CHECK(col_abs_dot(m.components, j, v) == doctest::Approx(1.0).epsilon(1e-8));
  }
  // Axis order 4 > 2 > 1.
  CHECK(std::abs(m.components(0, 0)) > 0.99);
  CHECK(std::abs(m.components(1, 1)) > 0.99);
  CHECK(std::abs(m.components(2, 2)) > 0.99);
  const Eigen::MatrixXd gram = m.components.transpose() * m.components;
  CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(m.explained[0] >= m.explained[1]);
  CHECK(m.explained[1] >= m.explained[2]);
}

TEST_CASE("pca scores, reconstruction and transform") {
  Rng rng(3);
  std::vector<RealMap> maps(4, RealMap(15, 17));
  for (auto& m : maps)
    for (auto& v : m.storage()) v = rng.uniform(0, 1);
  const FeatureCube cube = cube_from(maps);
  const auto model = pca_fit(cube, 4);
  const auto sc = scores(model, cube);
  for (std::size_t i = 0; i < cube.valid().size(); ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0;
      for (std::size_t ch = 0; ch < 4; ++ch) s += (maps[ch][i] - model.mean(ch)) * model.components(ch, j);
      CHECK(std::abs(sc[j][i] - s) < 1e-10);
    }
    for (std::size_t ch = 0; ch < 4; ++ch) {
      double back = model.mean(ch);
      for (std::size_t j = 0; j < 4; ++j) back += sc[j][i] * model.components(ch, j);
      CHECK(std::abs(back - maps[ch][i]) < 1e-10);
    }
  }
  const FeatureCube t = transform(model, cube);
  CHECK(t.names() == std::vector<std::string>{"pca1", "pca2", "pca3", "pca4"});
  for (const auto& ch : t.channels()) {
    CHECK(*std::min_element(ch.values.storage().begin(), ch.values.storage().end()) == 0.0);
    CHECK(*std::max_element(ch.values.storage().begin(), ch.values.storage().end()) == 1.0);
  }
  CHECK(transform(model, cube)[0] == t[0]);
  const FeatureCube three = cube_from({maps[0], maps[1], maps[2]});
  CHECK_THROWS_AS(transform(model, three), InvalidArgument);
}

TEST_CASE("transform of a constant cube is zero") {
  Rng rng(4);
  std::vector<RealMap> maps(3, RealMap(10, 10));
  for (auto& m : maps)
    for (auto& v : m.storage()) v = rng.uniform();
  const auto model = pca_fit(cube_from(maps), 3);
  const FeatureCube flat = cube_from({RealMap(10, 10, 0.3), RealMap(10, 10, 0.3), RealMap(10, 10, 0.3)});
  const FeatureCube t = transform(model, flat);
  for (const auto& ch : t.channels())
    for (double v : ch.values.storage()) CHECK(v == 0.0);
}

TEST_CASE("mnf ranks a pure-noise channel last") {
  Rng rng(5);
  const std::size_t h = 80, w = 90;
  RealMap gx(h, w), gy(h, w), noise(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      gx(r, c) = double(c) / w;
      gy(r, c) = double(r) / h + 0.3 * double(c) / w;
      noise(r, c) = 0.2 * rng.normal();
    }
  const auto m = mnf_fit(cube_from({gx, gy, noise}), 3);
  CHECK(std::abs(m.components(2, 2)) > 0.99);
  CHECK(m.explained[0] >= m.explained[1]);
  CHECK(m.explained[1] >= m.explained[2]);
}

TEST_CASE("mnf equals pca under isotropic noise") {
  const FeatureCube cube = isotropic_noise_cube(6);
  const auto mnf = mnf_fit(cube, 3);
  const auto pca = pca_fit(cube, 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const Eigen::VectorXd v = pca.components.col(j);
    CHECK(col_abs_dot(mnf.components, j, v) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("mnf recovers a rank-one direction") {
  Rng rng(7);
  const Eigen::Vector3d u = Eigen::Vector3d(0.2, -0.5, 0.84).normalized();
  std::vector<RealMap> maps(3, RealMap(40, 40));
  for (std::size_t i = 0; i < 1600; ++i) {
    const double a = rng.normal();
    for (int k = 0; k < 3; ++k) maps[k][i] = a * u(k);
  }
  const auto m = mnf_fit(cube_from(maps), 1);
  CHECK(col_abs_dot(m.components, 0, u) > 1.0 - 1e-12);
}

TEST_CASE("mnf directions are scale invariant") {
  Rng rng(8);
  std::vector<RealMap> maps(3, RealMap(30, 40));
  for (std::size_t i = 0; i < 1200; ++i) {
    const double a = rng.normal(), b = rng.normal();
    maps[0][i] = a + 0.1 * rng.normal();
    maps[1][i] = a - b + 0.2 * rng.normal();
    maps[2][i] = b + 0.3 * rng.normal();
  }
  auto scaled = maps;
  for (auto& m : scaled)
    for (auto& v : m.storage()) v *= 7.5;
  const auto a = mnf_fit(cube_from(maps), 3), b = mnf_fit(cube_from(scaled), 3);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(col_abs_dot(a.components, j, b.components.col(j)) > 1.0 - 1e-8);
}

TEST_CASE("ica unmixes independent uniform sources") {
  Rng rng(9);
  RealMap s1(100, 100), s2(100, 100), x1(100, 100), x2(100, 100);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    s1[i] = rng.uniform(-1, 1);
    s2[i] = rng.uniform(-1, 1);
    x1[i] = s1[i] + 0.6 * s2[i];
    x2[i] = 0.4 * s1[i] + s2[i];
  }
  const FeatureCube cube = cube_from({x1, x2});
  const auto m = ica_fit(cube, 2);
  CHECK(m.converged);
  const auto sc = scores(m, cube);
  const double a = std::abs(correlation(sc[0], s1)), b = std::abs(correlation(sc[0], s2));
  const double best0 = std::max(a, b);
  const double best1 = a > b ? std::abs(correlation(sc[1], s2)) : std::abs(correlation(sc[1], s1));
  CHECK(best0 >= 0.99);
  CHECK(best1 >= 0.99);
  CHECK(std::abs(correlation(sc[0], sc[1])) < 1e-3);
  CHECK(model_to_json(ica_fit(cube, 2)) == model_to_json(m));
}

TEST_CASE("ica on gaussian data still whitens") {
  Rng rng(10);
  std::vector<RealMap> maps(3, RealMap(50, 50));
  for (std::size_t i = 0; i < 2500; ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal();
    maps[0][i] = a;
    maps[1][i] = a + b;
    maps[2][i] = b - c;
  }
  const FeatureCube cube = cube_from(maps);
  const auto m = ica_fit(cube, 3);
  const auto sc = scores(m, cube);
  for (const auto& s : sc) {
    double mean = 0, var = 0;
    for (double v : s.storage()) mean += v;
    mean /= 2500;
    for (double v : s.storage()) var += (v - mean) * (v - mean);
    CHECK(var / 2499 == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) CHECK(std::abs(correlation(sc[i], sc[j])) < 1e-3);
}

TEST_CASE("model json round trip") {
  lstest::TempDir dir;
  Rng rng(11);
  std::vector<RealMap> maps(3, RealMap(12, 12));
  for (auto& m : maps)
    for (auto& v : m.storage()) v = rng.uniform();
  const auto m = mnf_fit(cube_from(maps), 2);
  save_model(m, dir / "m.json");
  const auto r = load_model(dir / "m.json");
  CHECK(r.kind == ReductionKind::kMnf);
  CHECK((r.components - m.components).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.noise_whitening.rows() == 3);
  CHECK_THROWS_AS(model_from_json("{\"kind\": \"XYZ\"}"), ConfigError);
  CHECK_THROWS_AS(model_from_json("not json"), DataError);
}
