#include <doctest.h>

#include <cmath>
#include <numbers>

#include "common/error.hpp"
#include "io/png_io.hpp"
#include "projection/spherical.hpp"
#include "synth/synthetic.hpp"
#include "test_util.hpp"

using namespace lidarsphere;
using std::numbers::pi;

TEST_CASE("compute_angles") {
  auto a = compute_angles(0, 0, 1);
  CHECK(a.theta == 0.0);
  CHECK(a.phi == 0.0);
  a = compute_angles(1, 0, 0);
  CHECK(a.theta == doctest::Approx(pi / 2));
  CHECK(a.phi == 0.0);
  a = compute_angles(0, -1, 0);
  CHECK(a.theta == doctest::Approx(pi / 2));
  CHECK(a.phi == doctest::Approx(3 * pi / 2));
  CHECK_THROWS_AS(compute_angles(0, 0, 0), InvalidArgument);
}

TEST_CASE("grid sizes") {
  const GridSpec cbl = GridSpec::cbl();
  CHECK(cbl.height() == 540);
  CHECK(cbl.width() == 1440);
  CHECK_THROWS_AS(GridSpec(0, 1, 0, 1, 0, 0.1), InvalidArgument);
  CHECK_THROWS_AS(GridSpec(1, 1, 0, 1, 0.1, 0.1), InvalidArgument);
}

TEST_CASE("half-open intervals") {
  const GridSpec g = GridSpec::from_degrees(1.0, 0.0, 90.0);
  CHECK_FALSE(pixel_of(g, {pi / 2, 0.1}).in_grid());
  const auto p = pixel_of(g, {pi / 2 - 1e-9, 0.1});
  CHECK(p.row == 89);
  CHECK(pixel_of(g, {0.0, 0.0}) == PixelCoord{0, 0});
}

TEST_CASE("beam-aligned scan has one point per pixel") {
  const GridSpec g = GridSpec::cbl();
  const PointCloud shell = beam_aligned_shell(g, 12.0);
  REQUIRE(shell.size() == 777'600);
  const auto idx = project(shell, g);
  const auto d = density_map(idx);
  CHECK(d.mode() == 1);
  CHECK(d.pixels_above(1) == 0);
  CHECK(d.histogram[1] == 777'600);
}

TEST_CASE("density of coincident and empty clouds") {
  const GridSpec g = GridSpec::from_degrees(1.0, 0.0, 180.0);
  PointCloud two;
  two.points = {{1, 1, 1, 0, 0}, {1, 1, 1, 0, 0}};
  const auto d = density_map(project(two, g));
  CHECK(d.histogram[2] == 1);
  CHECK(d.pixels_above(1) == 1);
  const auto e = density_map(project(PointCloud{}, g));
  CHECK(e.histogram[0] == g.pixels());
}

TEST_CASE("rasterize reducers") {
  const GridSpec g = GridSpec::from_degrees(1.0, 0.0, 180.0);
  PointCloud c;
  c.points = {{5, 0, 0, 0, 1}, {2, 0, 0, 0, 2}};
  const auto idx = project(c, g);
  const std::vector<double> v{1.0, 3.0};
  const auto near = rasterize_channel(idx, v, Reducer::kNearest);
  const auto px = idx.pixel(0);
  CHECK(near(px.row, px.col) == 3.0);
  CHECK(rasterize_channel(idx, v, Reducer::kMean)(px.row, px.col) == 2.0);
  CHECK(rasterize_channel(idx, v, Reducer::kMax)(px.row, px.col) == 3.0);
  std::size_t nonzero = 0;
  for (double x : near.pixels()) nonzero += x != 0.0;
  CHECK(nonzero == 1);
  CHECK_THROWS_AS(rasterize_channel(idx, std::vector<double>{1.0}), InvalidArgument);
  CHECK(rasterize_labels(idx, std::vector<std::uint8_t>{1, 2})(px.row, px.col) == 2);
}

TEST_CASE("ties in range are broken by point id") {
  const GridSpec g = GridSpec::from_degrees(1.0, 0.0, 180.0);
  PointCloud c;
  c.points = {{3, 0, 0, 0, 0}, {3, 0, 0, 0, 0}, {1, 0, 0, 0, 0}};
  const auto idx = project(c, g);
  const auto pts = idx.points_in(idx.pixel(0).row, idx.pixel(0).col);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0] == 2);
  CHECK(pts[1] == 0);
  CHECK(pts[2] == 1);
  CHECK(project(c, g, 1) == project(c, g, 4));
}

TEST_CASE("back projection") {
  const GridSpec g = GridSpec::from_degrees(1.0, 0.0, 90.0);
  PointCloud c = lstest::random_cloud(2000, 4, 5.0);
  const auto idx = project(c, g);
  const auto all3 = back_project(idx, LabelMask(g.height(), g.width(), 3));
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(all3[i] == (idx.pixel(i).in_grid() ? 3 : 0));
  CHECK_THROWS_AS(back_project(idx, LabelMask(2, 2)), InvalidArgument);
}

TEST_CASE("label round trip on a one-point-per-pixel scan") {
  const GridSpec g = GridSpec::from_degrees(0.5, 0.0, 135.0);
  const PointCloud scan = synthetic_scan(g, SceneSpec{});
  REQUIRE(scan.size() > 10000);
  std::vector<std::uint8_t> labels;
  for (const auto& p : scan.points) labels.push_back(p.label);
  const auto idx = project(scan, g);
  CHECK(density_map(idx).pixels_above(1) == 0);
  const auto back = back_project(idx, rasterize_labels(idx, labels));
  CHECK(back == labels);
}

TEST_CASE("virtual sphere counts") {
  const GridSpec g = GridSpec::cbl();
  const Image<Rgb> colors(g.height(), g.width(), Rgb{10, 20, 30});
  VirtualSphereSpec s;
  CHECK(virtual_sphere(colors, g, s).size() == 48'600);

  const GridSpec ring = GridSpec::from_degrees(0.2, 45.0, 136.0);
  const Image<Rgb> rc(ring.height(), ring.width());
  VirtualSphereSpec fine{0.2, 1.0, 45.0, 136.0, 0.0, 360.0};
  CHECK(fine.rows() == 455);
  CHECK(fine.cols() == 1800);
  CHECK(virtual_sphere(rc, ring, fine).size() == 819'000);

  VirtualSphereSpec coarse{45.0, 2.0, 0.0, 135.0, 0.0, 360.0};
  CHECK(virtual_sphere(colors, g, coarse).size() == 3 * 8);

  VirtualSphereSpec one{1.0, 2.0, 10.0, 11.0, 20.0, 21.0};
  const PointCloud single = virtual_sphere(colors, g, one);
  REQUIRE(single.size() == 1);
  const auto a = compute_angles(single.points[0]);
  CHECK(a.theta == doctest::Approx(10.5 * pi / 180).epsilon(1e-6));
  CHECK(a.phi == doctest::Approx(20.5 * pi / 180).epsilon(1e-6));
  CHECK(single.colors[0] == Rgb{10, 20, 30});

  s.radius = 0.0;
  CHECK_THROWS_AS(virtual_sphere(colors, g, s), InvalidArgument);
  VirtualSphereSpec wide{1.0, 1.0, 0.0, 170.0, 0.0, 360.0};
  CHECK_THROWS_AS(virtual_sphere(colors, g, wide), InvalidArgument);
  VirtualSphereSpec empty{1.0, 1.0, 10.0, 10.0, 0.0, 360.0};
  CHECK_THROWS_AS(virtual_sphere(colors, g, empty), InvalidArgument);
}

TEST_CASE("png round trips") {
  lstest::TempDir dir;
  LabelMask m(7, 9);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint8_t>(i % 6);
  png::write_gray8(dir / "m.png", m);
  CHECK(png::read_gray8(dir / "m.png") == m);
  Image<Rgb> rgb(3, 4, Rgb{1, 2, 3});
  png::write_rgb8(dir / "c.png", rgb);
  CHECK(png::read_rgb8(dir / "c.png") == rgb);
  CHECK_THROWS(png::read_gray8(dir / "c.png"));
  Image<std::uint16_t> deep(2, 2, 40000);
  png::write_gray16(dir / "d.png", deep);
  CHECK(std::filesystem::file_size(dir / "d.png") > 0);
}
