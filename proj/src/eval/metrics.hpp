#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common/image.hpp"

namespace lidarsphere {

/// C x C counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : c_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return c_; }
  std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts_[gt * c_ + pred]; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * c_ + pred]; }
  std::uint64_t total() const;
  std::uint64_t tp(std::size_t c) const { return at(c, c); }
  std::uint64_t fp(std::size_t c) const;
  std::uint64_t fn(std::size_t c) const;
  std::uint64_t support(std::size_t c) const { return tp(c) + fn(c); }
  std::uint64_t predicted(std::size_t c) const { return tp(c) + fp(c); }

  /// Element-wise sum; throws InvalidArgument on a class-count mismatch.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t c_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Counts over entries whose ground-truth class is not in `exclude`. Throws
/// InvalidArgument on a length mismatch or a class id >= classes.
ConfusionMatrix confusion(std::span<const std::uint8_t> gt, std::span<const std::uint8_t> pred, std::size_t classes,
                          std::span<const std::uint8_t> exclude = {});
ConfusionMatrix confusion(const LabelMask& gt, const LabelMask& pred, std::size_t classes,
                          std::span<const std::uint8_t> exclude = {});

/// Per-class values are empty where undefined: recall without support, IoU
/// without support or predictions.
struct Metrics {
  double oacc = 0.0;
  double macc = 0.0;
  double miou = 0.0;
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> iou;

  /// Mean of the defined IoUs of classes not listed in `skip`.
  double mean_iou_excluding(std::span<const std::uint8_t> skip) const;
};

/// oAcc = trace / total; mAcc = mean recall over classes with support;
/// IoU_c = TP / (TP + FP + FN); mIoU = mean over defined IoUs.
Metrics metrics(const ConfusionMatrix& cm);

/// Shannon entropy (nats) of the K-bin histogram over [min, max] of the valid
/// entries. A null mask means every entry is valid.
double map_entropy(const RealMap& map, const BoolMask* valid = nullptr, std::size_t bins = 256);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Entry 0 is the anchor: recall 0, the precision of the first threshold and an
/// infinite threshold. The rest follow descending unique scores; positives at
/// threshold t are the entries with score >= t.
std::vector<PrPoint> pr_curve(std::span<const double> score, std::span<const std::uint8_t> errors);
std::vector<PrPoint> pr_curve(const RealMap& score, const BoolMask& errors, const BoolMask* valid = nullptr);

/// sum_j (R_{j+1} - R_j) P_{j+1}.
double auprc(std::span<const PrPoint> curve);

void write_pr_csv(std::span<const PrPoint> curve, const std::filesystem::path& path);

}  // namespace lidarsphere
