#include "pipeline/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lidarsphere {

Rgb class_color(std::uint8_t id) {
  static const auto schema = default_class_schema();
  for (const auto& c : schema)
    if (c.id == id) return c.color;
  return {128, 128, 128};
}

Image<Rgb> colorize_labels(const LabelMask& labels) {
  Image<Rgb> out(labels.height(), labels.width());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = class_color(labels[i]);
  return out;
}

Rgb hot_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto ch = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
  return {ch(3.0 * t), ch(3.0 * t - 1.0), ch(3.0 * t - 2.0)};
}

Image<Rgb> colorize_hot(const RealMap& map, const BoolMask& valid, double scale) {
  Image<Rgb> out(map.height(), map.width());
  for (std::size_t i = 0; i < map.size(); ++i)
    out[i] = valid[i] ? hot_color(scale > 0 ? map[i] / scale : 0.0) : Rgb{0, 0, 0};
  return out;
}

Image<std::uint8_t> to_gray8(const RealMap& map, const BoolMask& valid) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (valid[i]) {
      lo = std::min(lo, map[i]);
      hi = std::max(hi, map[i]);
    }
  Image<std::uint8_t> out(map.height(), map.width());
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (valid[i]) out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (map[i] - lo) / (hi - lo)));
  return out;
}

}  // namespace lidarsphere
