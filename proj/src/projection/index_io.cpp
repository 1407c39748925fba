#include "projection/index_io.hpp"

#include <fstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace lidarsphere {

namespace {
constexpr std::uint16_t kVersion = 1;
}

void save_projection_index(const ProjectionIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("PIDX", 4);
  binio::put<std::uint16_t>(out, kVersion);
  const GridSpec& g = index.grid();
  for (double v : {g.theta_min(), g.theta_max(), g.phi_min(), g.phi_max(), g.d_theta(), g.d_phi()})
    binio::put<double>(out, v);
  binio::put<std::uint64_t>(out, index.point_count());
  for (std::size_t i = 0; i < index.point_count(); ++i) {
    binio::put<std::int32_t>(out, index.pixel(i).row);
    binio::put<std::int32_t>(out, index.pixel(i).col);
    binio::put<double>(out, index.range(i));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ProjectionIndex load_projection_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  binio::expect_magic(in, "PIDX", path.string());
  const auto version = binio::get<std::uint16_t>(in, "PIDX version");
  if (version != kVersion) throw DataError(path.string() + ": unsupported PIDX version " + std::to_string(version));
  double a[6];
  for (double& v : a) v = binio::get<double>(in, "PIDX grid");
  GridSpec grid(a[0], a[1], a[2], a[3], a[4], a[5]);
  const auto n = binio::get<std::uint64_t>(in, "PIDX point count");
  if (n > (std::uint64_t{1} << 32)) throw DataError(path.string() + ": implausible point count");
  std::vector<PixelCoord> pixels(n);
  std::vector<double> range(n);
  for (std::size_t i = 0; i < n; ++i) {
    pixels[i].row = binio::get<std::int32_t>(in, "PIDX row");
    pixels[i].col = binio::get<std::int32_t>(in, "PIDX col");
    range[i] = binio::get<double>(in, "PIDX range");
    const PixelCoord& p = pixels[i];
    if (p.in_grid() && (std::size_t(p.row) >= grid.height() || p.col < 0 || std::size_t(p.col) >= grid.width()))
      throw DataError(path.string() + ": pixel of point " + std::to_string(i) + " lies outside the grid");
  }
  return ProjectionIndex(std::move(grid), std::move(pixels), std::move(range));
}

}  // namespace lidarsphere
