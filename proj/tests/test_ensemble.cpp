#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "ensemble/ensemble.hpp"
#include "test_util.hpp"

using namespace lidarsphere;

namespace {

LogitStack random_stack(std::size_t m, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed,
                        double scale = 3.0) {
  Rng rng(seed);
  LogitStack s(m, c, h, w);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t k = 0; k < c; ++k)
      for (auto& v : s.plane(a, k)) v = scale * rng.normal();
  return s;
}

// Scalar-loop oracle for one pixel.
struct PixelOracle {
  std::vector<double> p;
  int label;
  double total, expected;
};

std::vector<double> softmax(std::vector<double> z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double s = 0;
  for (double& v : z) s += (v = std::exp(v - mx));
  for (double& v : z) v /= s;
  return z;
}

double entropy(const std::vector<double>& p) {
  double h = 0;
  for (double v : p) h -= v * std::log(std::max(v, 1e-12));
  return h;
}

PixelOracle oracle_pixel(const LogitStack& s, std::size_t flat) {
  const std::size_t m = s.models(), c = s.classes();
  std::vector<double> mean(c, 0.0);
  double expected = 0;
  for (std::size_t a = 0; a < m; ++a) {
    std::vector<double> z(c);
    for (std::size_t k = 0; k < c; ++k) {
      z[k] = s.at(a, k, flat);
      mean[k] += z[k] / double(m);
    }
    expected += entropy(softmax(z)) / double(m);
  }
  PixelOracle o;
  o.p = softmax(mean);
  o.label = 0;
  for (std::size_t k = 1; k < c; ++k)
    if (o.p[k] > o.p[o.label]) o.label = int(k);
  o.total = entropy(o.p);
  o.expected = expected;
  return o;
}

}  // namespace

TEST_CASE("fuse examples") {
  LogitStack s(1, 2, 1, 1);
  s.at(0, 0, 0) = std::log(3.0);
  const auto r = fuse(s);
  CHECK(r.probabilities.at(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.probabilities.at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.labels[0] == 0);

  LogitStack sym = random_stack(2, 5, 3, 3, 1);
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t i = 0; i < 9; ++i) sym.at(1, k, i) = -sym.at(0, k, i);
  const auto u = fuse(sym);
  for (double v : u.probabilities.data) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  for (auto l : u.labels.storage()) CHECK(l == 0);

  CHECK_THROWS_AS(LogitStack(0, 2, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(LogitStack(1, 1, 1, 1), InvalidArgument);
  s.at(0, 1, 0) = std::nan("");
  CHECK_THROWS_AS(fuse(s), DataError);
}

TEST_CASE("fuse and uncertainty match a scalar oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t m = 1 + seed % 4, c = 2 + seed % 6;
    const LogitStack s = random_stack(m, c, 8, 8, seed);
    const auto f = fuse(s);
    const auto u = uncertainty(s);
    for (std::size_t i = 0; i < 64; ++i) {
      const auto o = oracle_pixel(s, i);
      double sum = 0;
      for (std::size_t k = 0; k < c; ++k) {
        CHECK(std::abs(f.probabilities.at(k, i) - o.p[k]) < 1e-12);
        sum += f.probabilities.at(k, i);
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
      CHECK(f.labels[i] == o.label);
      CHECK(std::abs(u.total[i] - o.total) < 1e-10);
      CHECK(std::abs(u.expected[i] - o.expected) < 1e-10);
      CHECK(std::abs(u.epistemic[i] - std::max(0.0, o.total - o.expected)) < 1e-10);
      CHECK(u.epistemic[i] >= 0.0);
      CHECK(u.epistemic[i] <= u.total[i] + 1e-9);
      CHECK(u.total[i] <= std::log(double(c)) + 1e-9);
    }
  }
}

TEST_CASE("fuse is invariant to a per-pixel logit shift") {
  const LogitStack s = random_stack(3, 4, 8, 8, 7);
  LogitStack t = s;
  Rng rng(8);
  for (std::size_t i = 0; i < 64; ++i) {
    const double shift = rng.uniform(-100, 100);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t k = 0; k < 4; ++k) t.at(a, k, i) += shift;
  }
  const auto a = fuse(s), b = fuse(t);
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < a.probabilities.data.size(); ++i)
    CHECK(std::abs(a.probabilities.data[i] - b.probabilities.data[i]) < 1e-9);
}

TEST_CASE("uncertainty is invariant to model order") {
  const LogitStack s = random_stack(3, 3, 8, 8, 9);
  LogitStack t(3, 3, 8, 8);
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 64; ++i) t.at(a, k, i) = s.at(order[a], k, i);
  const auto a = uncertainty(s), b = uncertainty(t);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(std::abs(a.total[i] - b.total[i]) < 1e-12);
    CHECK(std::abs(a.epistemic[i] - b.epistemic[i]) < 1e-12);
  }
}

TEST_CASE("uncertainty examples") {
  LogitStack same = random_stack(1, 4, 5, 5, 10);
  LogitStack dup = concat_models({same, same, same});
  const auto ud = uncertainty(dup);
  for (double v : ud.epistemic.storage()) CHECK(v < 1e-12);

  LogitStack opposed(2, 2, 1, 1);
  opposed.at(0, 0, 0) = 60;
  opposed.at(1, 1, 0) = 60;
  const auto u = uncertainty(opposed);
  CHECK(u.total[0] == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(u.expected[0] < 1e-20);
  CHECK(u.epistemic[0] == doctest::Approx(std::numbers::ln2).epsilon(1e-12));

  const auto flat = uncertainty(LogitStack(2, 6, 2, 2, 0.5));
  for (double v : flat.total.storage()) CHECK(v == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("dice and cross entropy") {
  const std::vector<double> p{1, 1, 0, 0};
  const std::vector<std::uint8_t> g{1, 0, 0, 0};
  CHECK(dice_loss(p, g) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const std::vector<double> pg{1, 0, 0, 0};
  CHECK(dice_loss(pg, g) == 0.0);
  const std::vector<double> ones{1, 1, 1, 1};
  const std::vector<std::uint8_t> zeros{0, 0, 0, 0};
  CHECK(dice_loss(ones, zeros) == 1.0);
  const std::vector<double> none{0, 0, 0, 0};
  CHECK(dice_loss(none, zeros) == 0.0);
  CHECK_THROWS_AS(dice_loss(p, std::vector<std::uint8_t>{1, 0}), InvalidArgument);

  const auto uniform = fuse(LogitStack(1, 6, 3, 3)).probabilities;
  LabelMask gt(3, 3, 2);
  CHECK(cross_entropy_loss(uniform, gt) == doctest::Approx(std::log(6.0)).epsilon(1e-12));

  LogitStack half(1, 2, 1, 1);
  LabelMask one(1, 1, 1);
  const auto ph = fuse(half).probabilities;
  CHECK(cross_entropy_loss(ph, one) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(combined_loss(ph, one) ==
        doctest::Approx(0.5 * dice_loss(ph, one) + 0.5 * std::numbers::ln2).epsilon(1e-12));

  LogitStack sure(1, 3, 2, 2);
  LabelMask lab(2, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    lab[i] = std::uint8_t(i % 3);
    sure.at(0, i % 3, i) = 80;
  }
  const auto ps = fuse(sure).probabilities;
  CHECK(cross_entropy_loss(ps, lab) < 1e-20);
  CHECK(dice_loss(ps, lab) < 1e-12);
  CHECK_THROWS_AS(cross_entropy_loss(ps, LabelMask(3, 3)), InvalidArgument);
}

TEST_CASE("lgts round trip and concat") {
  lstest::TempDir dir;
  const LogitStack s = random_stack(2, 3, 4, 5, 11);
  save_lgts(s, dir / "a.lgts");
  const LogitStack r = load_lgts(dir / "a.lgts");
  CHECK(r.models() == 2);
  CHECK(r.classes() == 3);
  CHECK(r.height() == 4);
  CHECK(r.width() == 5);
  for (std::size_t i = 0; i < s.data().size(); ++i) CHECK(r.data()[i] == double(float(s.data()[i])));

  const LogitStack both = concat_models({s, random_stack(1, 3, 4, 5, 12)});
  CHECK(both.models() == 3);
  CHECK(both.at(1, 2, 7) == s.at(1, 2, 7));
  CHECK_THROWS_WITH_AS(concat_models({s, random_stack(1, 4, 4, 5, 13)}), doctest::Contains("1"), DataError);

  std::ofstream(dir / "bad.lgts") << "NOPE";
  CHECK_THROWS_AS(load_lgts(dir / "bad.lgts"), DataError);
  CHECK_THROWS_AS(load_lgts(dir / "missing.lgts"), IoError);
}

namespace {

// Two classes split on feature 0 (x < 0.5 vs x >= 0.5), plus a noise feature.
FeatureCube blob_features(std::size_t h, std::size_t w, double overlap, std::uint64_t seed, LabelMask& truth) {
  Rng rng(seed);
  RealMap f0(h, w), f1(h, w);
  truth = LabelMask(h, w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const int cls = rng.uniform() < 0.5 ? 1 : 2;
    truth[i] = std::uint8_t(cls);
    f0[i] = (cls == 1 ? 0.3 : 0.7) + overlap * rng.normal();
    f1[i] = rng.uniform();
  }
  FeatureCube cube(h, w, BoolMask(h, w, 1));
  cube.add("f0", f0);
  cube.add("f1", f1);
  return cube;
}

double accuracy(const LabelMask& a, const LabelMask& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return double(hit) / double(a.size());
}

}  // namespace

TEST_CASE("baseline segmenter") {
  LabelMask truth;
  const FeatureCube sep = blob_features(40, 50, 0.03, 20, truth);
  BaselineOptions opt;
  opt.classes = 3;
  const LogitStack s = baseline_segment(sep, truth, 3, 42, opt);
  CHECK(s.models() == 3);
  CHECK(s.classes() == 3);
  CHECK(accuracy(fuse(s).labels, truth) >= 0.99);
  CHECK(baseline_segment(sep, truth, 3, 42, opt).data() == s.data());

  const std::vector<std::uint64_t> same{5, 5, 5};
  const auto us = uncertainty(baseline_segment(sep, truth, same, opt));
  for (double v : us.epistemic.storage()) CHECK(v < 1e-12);

  LabelMask noisy_truth;
  const FeatureCube noisy = blob_features(40, 50, 0.2, 21, noisy_truth);
  const std::vector<std::uint64_t> distinct{1, 2, 3};
  const auto u = uncertainty(baseline_segment(noisy, noisy_truth, distinct, opt));
  double mean = 0;
  for (double v : u.epistemic.storage()) mean += v;
  CHECK(mean / double(u.epistemic.size()) > 0.0);

  LabelMask single(40, 50, 1);
  CHECK_THROWS_AS(baseline_segment(sep, single, 2, 1, opt), DataError);
}
