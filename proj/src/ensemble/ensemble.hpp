#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "common/image.hpp"
#include "features/feature_cube.hpp"
#include "refine/forest.hpp"

namespace lidarsphere {

/// Logits of M models over C classes on an H x W grid, stored model-major then
/// class-major, each plane row-major.
class LogitStack {
 public:
  LogitStack() = default;
  /// Throws InvalidArgument unless M >= 1 and C >= 2.
  LogitStack(std::size_t models, std::size_t classes, std::size_t height, std::size_t width, double fill = 0.0);

  std::size_t models() const noexcept { return m_; }
  std::size_t classes() const noexcept { return c_; }
  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t pixels() const noexcept { return h_ * w_; }

  double& at(std::size_t m, std::size_t c, std::size_t flat) { return data_[(m * c_ + c) * h_ * w_ + flat]; }
  double at(std::size_t m, std::size_t c, std::size_t flat) const { return data_[(m * c_ + c) * h_ * w_ + flat]; }
  std::span<double> plane(std::size_t m, std::size_t c) { return {data_.data() + (m * c_ + c) * h_ * w_, h_ * w_}; }
  std::span<const double> plane(std::size_t m, std::size_t c) const {
    return {data_.data() + (m * c_ + c) * h_ * w_, h_ * w_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

  /// Throws DataError naming the first non-finite logit.
  void check_finite() const;

 private:
  std::size_t m_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

/// Per-pixel class distribution, class-major planes.
struct ProbabilityMap {
  std::size_t classes = 0, height = 0, width = 0;
  std::vector<double> data;

  double at(std::size_t c, std::size_t flat) const { return data[c * height * width + flat]; }
  std::span<const double> plane(std::size_t c) const { return {data.data() + c * height * width, height * width}; }
};

struct FuseResult {
  ProbabilityMap probabilities;
  LabelMask labels;
};

/// Mean logits over models, softmax per pixel, argmax with the smallest class
/// id winning ties.
FuseResult fuse(const LogitStack& stack, unsigned workers = 0);

/// Entropies in nats. epistemic = total - expected, clamped at 0.
struct UncertaintyMaps {
  RealMap total;
  RealMap expected;
  RealMap epistemic;
};

UncertaintyMaps uncertainty(const LogitStack& stack, unsigned workers = 0);

inline constexpr double kProbFloor = 1e-12;

/// Binary Dice loss 1 - 2 sum(p g) / (sum p + sum g); 0 when both are empty.
double dice_loss(std::span<const double> pred, std::span<const std::uint8_t> gt);
/// Mean over classes of one-vs-rest Dice.
double dice_loss(const ProbabilityMap& pred, const LabelMask& gt);
/// Mean negative log-likelihood of the true class (probability floored).
double cross_entropy_loss(const ProbabilityMap& pred, const LabelMask& gt);
/// 0.5 * dice + 0.5 * cross entropy.
double combined_loss(const ProbabilityMap& pred, const LabelMask& gt);

/// Stacks models from several files along M. Throws DataError on C/H/W mismatch.
LogitStack concat_models(const std::vector<LogitStack>& parts);

/// LGTS container: "LGTS", u16 version, u32 M/C/H/W, then M*C float32 planes.
void save_lgts(const LogitStack& stack, const std::filesystem::path& path);
LogitStack load_lgts(const std::filesystem::path& path);

struct BaselineOptions {
  std::size_t classes = 6;
  ForestOptions forest{.trees = 25, .max_depth = 16, .max_samples_per_class = 2000};
  unsigned workers = 0;
};

/// Forest-ensemble stand-in for trained segmentation networks. Member m is a
/// forest fitted on a bootstrap resample of the labeled pixels (train_mask != 0
/// on valid pixels) with seed member_seeds[m]; its logits are
/// log((votes_c + 1) / (trees + C)).
LogitStack baseline_segment(const FeatureCube& features, const LabelMask& train_mask,
                            std::span<const std::uint64_t> member_seeds, const BaselineOptions& options = {});
/// M members with seeds derived from `seed`.
LogitStack baseline_segment(const FeatureCube& features, const LabelMask& train_mask, std::size_t models,
                            std::uint64_t seed, const BaselineOptions& options = {});

}  // namespace lidarsphere
