#pragma once

#include <array>

namespace lidarsphere {

using Mat3 = std::array<std::array<double, 3>, 3>;

struct SymEigen3 {
  std::array<double, 3> values{};                 // ascending
  std::array<std::array<double, 3>, 3> vectors{};  // vectors[k] pairs with values[k], unit length
};

/// Closed-form eigen-decomposition of a symmetric 3x3 matrix (only the upper
/// triangle is read). Non-iterative: trigonometric eigenvalues followed by
/// cross-product eigenvectors, after scaling by the largest entry.
/// Each eigenvector's sign is fixed so that its first nonzero component is
/// positive; repeated eigenvalues get an orthonormal basis chosen by the same
/// deterministic construction.
SymEigen3 sym_eigen3(const Mat3& a);

}  // namespace lidarsphere
