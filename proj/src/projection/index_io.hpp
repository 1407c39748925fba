#pragma once

#include <filesystem>

#include "projection/spherical.hpp"

namespace lidarsphere {

/// PIDX sidecar: "PIDX", u16 version, grid angles and steps as f64, u64 point
/// count, then per point i32 row, i32 col and f64 range.
void save_projection_index(const ProjectionIndex& index, const std::filesystem::path& path);
ProjectionIndex load_projection_index(const std::filesystem::path& path);

}  // namespace lidarsphere
