#pragma once

#include <filesystem>

#include "pointcloud/point_cloud.hpp"

namespace lidarsphere {

/// Reads a PLY 1.0 file (ascii or binary_little_endian). The vertex element must
/// carry x, y, z; intensity, label and red/green/blue are picked up when present.
/// Other vertex properties are skipped. Errors name the header line or body
/// byte offset where parsing failed.
PointCloud load_ply(const std::filesystem::path& path);

/// Writes float x/y/z, then float intensity, uchar red/green/blue and uchar
/// label for whichever optional attributes the cloud carries.
void save_ply(const PointCloud& cloud, const std::filesystem::path& path, bool binary = true);

}  // namespace lidarsphere
