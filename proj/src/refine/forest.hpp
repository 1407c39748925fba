#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lidarsphere {

struct ForestOptions {
  std::size_t trees = 100;
  std::size_t max_depth = 20;
  std::size_t min_samples_leaf = 1;
  /// Features tried per split; 0 = floor(sqrt(d)).
  std::size_t max_features = 0;
  /// Bootstrap draws per class for each tree; 0 = N / (classes present).
  std::size_t samples_per_class = 0;
  /// Upper bound on the per-class draw when samples_per_class is 0.
  std::size_t max_samples_per_class = 5000;
  std::uint64_t seed = 42;
  unsigned workers = 0;
};

/// Row-major n x d feature matrix view.
struct FeatureRows {
  std::span<const double> data;
  std::size_t dim = 0;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t i) const { return data.subspan(i * dim, dim); }
};

/// Random forest of Gini-split CART trees, each grown on a class-balanced
/// bootstrap (equal draws per class, with replacement) with sqrt(d) feature
/// subsampling at every split. Training and prediction are deterministic for a
/// seed at any worker count.
class RandomForest {
 public:
  /// Throws InvalidArgument on shape errors and DataError if fewer than two
  /// classes are present.
  static RandomForest train(const FeatureRows& x, std::span<const std::uint8_t> y, std::size_t num_classes,
                            const ForestOptions& options = {});

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t tree_count() const noexcept { return trees_.size(); }

  /// Mean of per-tree leaf class distributions; sums to 1.
  void predict_proba(std::span<const double> x, std::span<double> out) const;
  /// Count of trees whose leaf majority is each class.
  void predict_votes(std::span<const double> x, std::span<std::uint32_t> out) const;
  /// Batch predict_proba, row-major n x num_classes.
  std::vector<double> predict_proba(const FeatureRows& x, unsigned workers = 0) const;

 private:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t dist = 0;  // leaf: offset into Tree::leaf_probs
    std::uint8_t majority = 0;
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<double> leaf_probs;
  };

  const Node& leaf_for(const Tree& t, std::span<const double> x) const;
  static Tree grow(const FeatureRows& x, std::span<const std::uint8_t> y, std::vector<std::uint32_t> samples,
                   std::size_t num_classes, const ForestOptions& options, std::uint64_t seed);

  std::size_t num_classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace lidarsphere
