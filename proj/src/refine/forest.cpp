#include "refine/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"

namespace lidarsphere {
namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += c * c;
  return 1.0 - s / (total * total);
}

std::uint64_t tree_seed(std::uint64_t seed, std::size_t t) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (t + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomForest RandomForest::train(const FeatureRows& x, std::span<const std::uint8_t> y, std::size_t num_classes,
                                 const ForestOptions& options) {
  if (x.dim == 0) throw InvalidArgument("forest: feature dimension must be positive");
  if (x.data.size() % x.dim != 0) throw InvalidArgument("forest: feature buffer is not a whole number of rows");
  if (x.rows() != y.size()) throw InvalidArgument("forest: feature rows and labels differ in length");
  if (options.trees == 0) throw InvalidArgument("forest: need at least one tree");
  if (num_classes < 2 || num_classes > 256) throw InvalidArgument("forest: class count must lie in [2, 256]");

  std::vector<std::vector<std::uint32_t>> by_class(num_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= num_classes) throw InvalidArgument("forest: label " + std::to_string(y[i]) + " >= class count");
    by_class[y[i]].push_back(static_cast<std::uint32_t>(i));
  }
  std::size_t present = 0;
  for (const auto& c : by_class) present += c.empty() ? 0 : 1;
  if (present < 2) throw DataError("forest: training data holds fewer than two classes");

  std::size_t per_class = options.samples_per_class;
  if (per_class == 0) {
    per_class = std::max<std::size_t>(1, y.size() / present);
    if (options.max_samples_per_class > 0) per_class = std::min(per_class, options.max_samples_per_class);
  }

  RandomForest f;
  f.num_classes_ = num_classes;
  f.dim_ = x.dim;
  f.trees_.resize(options.trees);
  parallel_for_chunks(options.trees, 1, options.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) {
      const std::uint64_t seed = tree_seed(options.seed, t);
      Rng rng(seed);
      std::vector<std::uint32_t> samples;
      samples.reserve(per_class * present);
      for (const auto& members : by_class) {
        if (members.empty()) continue;
        for (std::size_t k = 0; k < per_class; ++k) samples.push_back(members[rng.below(members.size())]);
      }
      f.trees_[t] = grow(x, y, std::move(samples), num_classes, options, seed ^ 0x5bd1e995ULL);
    }
  });
  return f;
}

RandomForest::Tree RandomForest::grow(const FeatureRows& x, std::span<const std::uint8_t> y,
                                      std::vector<std::uint32_t> samples, std::size_t num_classes,
                                      const ForestOptions& options, std::uint64_t seed) {
  Tree tree;
  Rng rng(seed);
  const std::size_t d = x.dim;
  const std::size_t mtry = options.max_features > 0
                               ? std::min(options.max_features, d)
                               : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
  const std::size_t min_leaf = std::max<std::size_t>(1, options.min_samples_leaf);

  struct Work {
    std::int32_t node;
    std::size_t begin, end, depth;
  };
  std::vector<Work> stack;
  tree.nodes.push_back({});
  stack.push_back({0, 0, samples.size(), 0});
  std::vector<std::size_t> features(d);
  std::vector<std::pair<double, std::uint8_t>> sorted;
  std::vector<double> counts(num_classes), left(num_classes), right(num_classes);

  auto make_leaf = [&](std::int32_t ni, const std::vector<double>& cnt, double total) {
    Node& n = tree.nodes[static_cast<std::size_t>(ni)];
    n.feature = -1;
    n.dist = static_cast<std::uint32_t>(tree.leaf_probs.size());
    std::size_t best = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      tree.leaf_probs.push_back(cnt[c] / total);
      if (cnt[c] > cnt[best]) best = c;
    }
    n.majority = static_cast<std::uint8_t>(best);
  };

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = w.begin; i < w.end; ++i) counts[y[samples[i]]] += 1.0;
    const double total = static_cast<double>(w.end - w.begin);
    const double parent_gini = gini(counts, total);
    if (w.depth >= options.max_depth || parent_gini <= 0.0 || w.end - w.begin < 2 * min_leaf) {
      make_leaf(w.node, counts, total);
      continue;
    }

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t k = 0; k < mtry; ++k) std::swap(features[k], features[k + rng.below(d - k)]);

    double best_score = parent_gini - 1e-12;
    std::size_t best_feature = d;
    double best_threshold = 0.0;
    for (std::size_t fi = 0; fi < mtry; ++fi) {
      const std::size_t f = features[fi];
      sorted.clear();
      for (std::size_t i = w.begin; i < w.end; ++i) sorted.emplace_back(x.data[samples[i] * d + f], y[samples[i]]);
      std::sort(sorted.begin(), sorted.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left[sorted[i].second] += 1.0;
        right[sorted[i].second] -= 1.0;
        const std::size_t nl = i + 1, nr = sorted.size() - nl;
        if (sorted[i].first == sorted[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
        const double score = (static_cast<double>(nl) * gini(left, static_cast<double>(nl)) +
                              static_cast<double>(nr) * gini(right, static_cast<double>(nr))) /
                             total;
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
          if (best_threshold >= sorted[i + 1].first) best_threshold = sorted[i].first;
        }
      }
    }
    if (best_feature == d) {
      make_leaf(w.node, counts, total);
      continue;
    }
    auto mid = std::partition(samples.begin() + static_cast<std::ptrdiff_t>(w.begin),
                              samples.begin() + static_cast<std::ptrdiff_t>(w.end),
                              [&](std::uint32_t s) { return x.data[s * d + best_feature] <= best_threshold; });
    const auto split = static_cast<std::size_t>(mid - samples.begin());
    const auto li = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    const auto ri = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    Node& n = tree.nodes[static_cast<std::size_t>(w.node)];
    n.feature = static_cast<std::int32_t>(best_feature);
    n.threshold = best_threshold;
    n.left = li;
    n.right = ri;
    stack.push_back({ri, split, w.end, w.depth + 1});
    stack.push_back({li, w.begin, split, w.depth + 1});
  }
  return tree;
}

const RandomForest::Node& RandomForest::leaf_for(const Tree& t, std::span<const double> x) const {
  const Node* n = &t.nodes[0];
  while (n->feature >= 0) n = &t.nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right)];
  return *n;
}

void RandomForest::predict_proba(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dim_) throw InvalidArgument("forest: feature dimension " + std::to_string(x.size()) + " != " + std::to_string(dim_));
  if (out.size() != num_classes_) throw InvalidArgument("forest: output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& t : trees_) {
    const Node& leaf = leaf_for(t, x);
    for (std::size_t c = 0; c < num_classes_; ++c) out[c] += t.leaf_probs[leaf.dist + c];
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (double& v : out) v *= inv;
}

void RandomForest::predict_votes(std::span<const double> x, std::span<std::uint32_t> out) const {
  if (x.size() != dim_) throw InvalidArgument("forest: feature dimension " + std::to_string(x.size()) + " != " + std::to_string(dim_));
  if (out.size() != num_classes_) throw InvalidArgument("forest: output size mismatch");
  std::fill(out.begin(), out.end(), 0u);
  for (const auto& t : trees_) ++out[leaf_for(t, x).majority];
}

std::vector<double> RandomForest::predict_proba(const FeatureRows& x, unsigned workers) const {
  if (x.dim != dim_) throw InvalidArgument("forest: feature dimension " + std::to_string(x.dim) + " != " + std::to_string(dim_));
  const std::size_t n = x.rows();
  std::vector<double> out(n * num_classes_);
  parallel_for_chunks(n, 2048, workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      predict_proba(x.row(i), std::span<double>(out).subspan(i * num_classes_, num_classes_));
  });
  return out;
}

}  // namespace lidarsphere
