#pragma once

#include <cstddef>

#include "common/image.hpp"
#include "pointcloud/point_cloud.hpp"

namespace lidarsphere {

/// Class colors of the default schema; ids past the schema are gray.
Rgb class_color(std::uint8_t id);
Image<Rgb> colorize_labels(const LabelMask& labels);

/// Black -> red -> yellow -> white for t in [0, 1].
Rgb hot_color(double t);
/// Values divided by `scale` and clamped; invalid pixels black.
Image<Rgb> colorize_hot(const RealMap& map, const BoolMask& valid, double scale);

/// Min-max over valid pixels onto 0..255 (constant maps to 0); invalid pixels 0.
Image<std::uint8_t> to_gray8(const RealMap& map, const BoolMask& valid);

}  // namespace lidarsphere
