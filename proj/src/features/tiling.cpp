#include "features/tiling.hpp"

#include <string>

namespace lidarsphere {

std::vector<std::pair<std::size_t, std::size_t>> strip_columns(std::size_t width, std::size_t n_tiles) {
  if (n_tiles == 0) throw InvalidArgument("tile: n_tiles must be positive");
  if (width < n_tiles) throw InvalidArgument("tile: width " + std::to_string(width) + " smaller than tile count");
  std::vector<std::pair<std::size_t, std::size_t>> cols;
  const std::size_t step = (width + n_tiles - 1) / n_tiles;
  if (step * (n_tiles - 1) < width) {
    for (std::size_t t = 0; t < n_tiles; ++t) cols.emplace_back(t * step, std::min(width, (t + 1) * step));
    return cols;
  }
  for (std::size_t t = 0; t < n_tiles; ++t) cols.emplace_back(t * width / n_tiles, (t + 1) * width / n_tiles);
  return cols;
}

TileSet tile(const FeatureCube& cube, std::size_t n_tiles, std::size_t buffer) {
  TileSet set;
  set.height = cube.height();
  set.width = cube.width();
  set.buffer = buffer;
  const std::size_t h = cube.height(), w = cube.width();
  const std::size_t ph = round_up(h, kTileAlign);
  for (const auto& [c0, c1] : strip_columns(w, n_tiles)) {
    Tile t;
    const std::size_t core_w = c1 - c0;
    t.core = {0, c0, h, core_w};
    t.core_in_tile = {0, buffer, h, core_w};
    const std::size_t pw = round_up(core_w + 2 * buffer, kTileAlign);
    t.padded = {0, 0, ph, pw};
    BoolMask valid(ph, pw, 0);
    const std::size_t span = core_w + 2 * buffer;
    // Column k of the tile maps to image column (c0 - buffer + k) mod W.
    auto src_col = [&](std::size_t k) { return (c0 + w * (buffer / w + 1) - buffer + k) % w; };
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t k = 0; k < span; ++k) valid(r, k) = cube.valid()(r, src_col(k));
    t.image = FeatureCube(ph, pw, std::move(valid));
    for (const auto& ch : cube.channels()) {
      RealMap m(ph, pw, 0.0);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t k = 0; k < span; ++k) m(r, k) = ch.values(r, src_col(k));
      t.image.add(ch.name, std::move(m));
    }
    set.tiles.push_back(std::move(t));
  }
  return set;
}

FeatureCube merge_tile_cubes(const TileSet& tiles, const std::vector<FeatureCube>& per_tile) {
  if (per_tile.size() != tiles.tiles.size()) throw InvalidArgument("merge_tile_cubes: wrong tile count");
  if (per_tile.empty()) throw InvalidArgument("merge_tile_cubes: no tiles");
  std::vector<BoolMask> masks;
  for (const auto& c : per_tile) masks.push_back(c.valid());
  FeatureCube out(tiles.height, tiles.width, merge_tiles(tiles, masks));
  const std::size_t n_ch = per_tile.front().channel_count();
  for (std::size_t k = 0; k < n_ch; ++k) {
    std::vector<RealMap> maps;
    for (const auto& c : per_tile) {
      if (c.channel_count() != n_ch) throw InvalidArgument("merge_tile_cubes: tiles differ in channel count");
      maps.push_back(c[k]);
    }
    out.add(per_tile.front().channel(k).name, merge_tiles(tiles, maps));
  }
  return out;
}

}  // namespace lidarsphere
