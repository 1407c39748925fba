#include "pointcloud/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "common/error.hpp"

namespace lidarsphere {
namespace {

constexpr std::uint32_t kLeafSize = 12;

inline double sq_dist(const std::array<float, 3>& p, const Vec3& q) {
  const double dx = static_cast<double>(p[0]) - q[0];
  const double dy = static_cast<double>(p[1]) - q[1];
  const double dz = static_cast<double>(p[2]) - q[2];
  return dx * dx + dy * dy + dz * dz;
}

struct Candidate {
  double d2;
  std::uint32_t id;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
};

}  // namespace

SpatialIndex::SpatialIndex(const PointCloud& cloud) {
  positions_.reserve(cloud.size());
  for (const auto& p : cloud.points) positions_.push_back({p.x, p.y, p.z});
  build();
}

SpatialIndex::SpatialIndex(std::vector<std::array<float, 3>> positions) : positions_(std::move(positions)) {
  build();
}

void SpatialIndex::build() {
  if (positions_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw InvalidArgument("SpatialIndex: too many points");
  order_.resize(positions_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.clear();
  nodes_.reserve(2 * positions_.size() / kLeafSize + 2);
  if (!positions_.empty()) build_node(0, static_cast<std::uint32_t>(positions_.size()));
}

std::int32_t SpatialIndex::build_node(std::uint32_t begin, std::uint32_t end) {
  const auto idx = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, 0.0f, 0});
  if (end - begin <= kLeafSize) return idx;

  float lo[3] = {INFINITY, INFINITY, INFINITY};
  float hi[3] = {-INFINITY, -INFINITY, -INFINITY};
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& p = positions_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  std::uint8_t axis = 0;
  for (std::uint8_t a = 1; a < 3; ++a)
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  if (hi[axis] - lo[axis] <= 0.0f) return idx;  // all coincident: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return positions_[a][axis] < positions_[b][axis]; });
  const float split = positions_[order_[mid]][axis];
  nodes_[idx].axis = axis;
  nodes_[idx].split = split;
  const std::int32_t left = build_node(begin, mid);
  const std::int32_t right = build_node(mid, end);
  nodes_[idx].left = left;
  nodes_[idx].right = right;
  return idx;
}

void SpatialIndex::check_id(std::size_t id) const {
  if (id >= positions_.size())
    throw InvalidArgument("point id " + std::to_string(id) + " out of range (size " + std::to_string(size()) + ")");
}

std::vector<Neighbor> SpatialIndex::knn(std::size_t id, std::size_t k) const {
  check_id(id);
  const auto& p = positions_[id];
  return knn(Vec3{p[0], p[1], p[2]}, k, static_cast<std::uint32_t>(id));
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3& query, std::size_t k, std::uint32_t exclude) const {
  std::vector<Neighbor> result;
  if (k == 0 || nodes_.empty()) return result;
  std::priority_queue<Candidate> heap;  // max-heap of the best k so far
  // Elements in [lo, hi) of the left subtree satisfy coord <= split and the right
  // subtree coord >= split, so the plane distance is a valid lower bound.
  auto visit = [&](auto&& self, std::int32_t ni) -> void {
    const Node& n = nodes_[ni];
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t pid = order_[i];
        if (pid == exclude) continue;
        const Candidate c{sq_dist(positions_[pid], query), pid};
        if (heap.size() < k) heap.push(c);
        else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = query[n.axis] - static_cast<double>(n.split);
    const std::int32_t near = diff < 0 ? n.left : n.right;
    const std::int32_t far = diff < 0 ? n.right : n.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().d2) self(self, far);
  };
  visit(visit, 0);
  result.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    result[i] = Neighbor{heap.top().id, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return result;
}

std::vector<Neighbor> SpatialIndex::radius(std::size_t id, double r) const {
  check_id(id);
  const auto& p = positions_[id];
  return radius(Vec3{p[0], p[1], p[2]}, r, static_cast<std::uint32_t>(id));
}

std::vector<Neighbor> SpatialIndex::radius(const Vec3& query, double r, std::uint32_t exclude) const {
  if (!(r > 0.0)) throw InvalidArgument("radius must be positive");
  std::vector<Candidate> found;
  if (nodes_.empty()) return {};
  const double r2 = r * r;
  auto visit = [&](auto&& self, std::int32_t ni) -> void {
    const Node& n = nodes_[ni];
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t pid = order_[i];
        if (pid == exclude) continue;
        const double d2 = sq_dist(positions_[pid], query);
        if (d2 <= r2) found.push_back({d2, pid});
      }
      return;
    }
    const double diff = query[n.axis] - static_cast<double>(n.split);
    if (diff <= r) self(self, n.left);
    if (diff >= -r) self(self, n.right);
  };
  visit(visit, 0);
  std::sort(found.begin(), found.end());
  std::vector<Neighbor> result(found.size());
  for (std::size_t i = 0; i < found.size(); ++i) result[i] = Neighbor{found[i].id, std::sqrt(found[i].d2)};
  return result;
}

void AdaptiveRadiusSpec::validate() const {
  if (!(lambda > 0.0)) throw InvalidArgument("adaptive radius: lambda must be positive");
  if (!(r_min > 0.0) || !(r_min <= r_max)) throw InvalidArgument("adaptive radius: need 0 < r_min <= r_max");
  if (k_ref == 0) throw InvalidArgument("adaptive radius: k_ref must be at least 1");
}

double adaptive_radius_from_distance(double d_k, const AdaptiveRadiusSpec& spec) {
  return std::clamp(spec.lambda * d_k, spec.r_min, spec.r_max);
}

double adaptive_radius(const SpatialIndex& index, std::size_t point_id, const AdaptiveRadiusSpec& spec) {
  spec.validate();
  if (index.size() <= spec.k_ref)
    throw InvalidArgument("adaptive radius: cloud needs more than k_ref=" + std::to_string(spec.k_ref) + " points");
  const auto nn = index.knn(point_id, spec.k_ref);
  return adaptive_radius_from_distance(nn.back().distance, spec);
}

std::vector<Neighbor> neighbors_in_radius(const SpatialIndex& index, std::size_t point_id, double radius) {
  return index.radius(point_id, radius);
}

}  // namespace lidarsphere
