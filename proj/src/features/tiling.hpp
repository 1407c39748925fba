#pragma once

#include <cstddef>
#include <vector>

#include "common/error.hpp"
#include "common/image.hpp"
#include "features/feature_cube.hpp"

namespace lidarsphere {

struct Rect {
  std::size_t row = 0, col = 0, height = 0, width = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// One vertical strip. `core` is in full-image coordinates; `core_in_tile`
/// locates the same pixels inside the padded tile. `padded` is the tile canvas
/// size, a multiple of 32 in both dimensions.
struct Tile {
  Rect core;
  Rect core_in_tile;
  Rect padded;
  FeatureCube image;
};

struct TileSet {
  std::size_t height = 0, width = 0;
  std::size_t buffer = 0;
  std::vector<Tile> tiles;
};

inline constexpr std::size_t kTileAlign = 32;

inline std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

/// Core column ranges [begin, end) of `n_tiles` vertical strips of a W-wide
/// image: ceil(W / n) wide with the remainder in the last strip, falling back to
/// a balanced split when that rule would leave a strip empty.
std::vector<std::pair<std::size_t, std::size_t>> strip_columns(std::size_t width, std::size_t n_tiles);

/// Splits a cube into vertical strips, each widened by `buffer` columns on both
/// sides (wrapping across the azimuth seam) and zero-padded to multiples of 32.
TileSet tile(const FeatureCube& cube, std::size_t n_tiles, std::size_t buffer = 32);

/// Copies each tile's core back into a full canvas; buffers are discarded.
template <typename T>
Image<T> merge_tiles(const TileSet& tiles, const std::vector<Image<T>>& per_tile) {
  if (per_tile.size() != tiles.tiles.size())
    throw InvalidArgument("merge_tiles: got " + std::to_string(per_tile.size()) + " maps for " +
                          std::to_string(tiles.tiles.size()) + " tiles");
  Image<T> out(tiles.height, tiles.width);
  for (std::size_t t = 0; t < per_tile.size(); ++t) {
    const Tile& tl = tiles.tiles[t];
    const Image<T>& m = per_tile[t];
    if (!m.same_shape(tl.padded.height, tl.padded.width))
      throw InvalidArgument("merge_tiles: map " + std::to_string(t) + " does not match its padded tile size");
    for (std::size_t r = 0; r < tl.core.height; ++r)
      for (std::size_t c = 0; c < tl.core.width; ++c)
        out(tl.core.row + r, tl.core.col + c) = m(tl.core_in_tile.row + r, tl.core_in_tile.col + c);
  }
  return out;
}

/// Channel-wise merge of per-tile cubes (names taken from the first tile).
FeatureCube merge_tile_cubes(const TileSet& tiles, const std::vector<FeatureCube>& per_tile);

}  // namespace lidarsphere
