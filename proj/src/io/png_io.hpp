#pragma once

#include <cstdint>
#include <filesystem>

#include "common/image.hpp"
#include "pointcloud/point_cloud.hpp"

namespace lidarsphere::png {

/// 8-bit grayscale; label masks use the class id as pixel value.
void write_gray8(const std::filesystem::path& path, const Image<std::uint8_t>& img);
void write_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& img);
void write_rgb8(const std::filesystem::path& path, const Image<Rgb>& img);

/// Reads any 8-bit grayscale PNG. Palette, RGB and 16-bit inputs are rejected so
/// that a label mask cannot be silently reinterpreted.
Image<std::uint8_t> read_gray8(const std::filesystem::path& path);
Image<Rgb> read_rgb8(const std::filesystem::path& path);

}  // namespace lidarsphere::png
