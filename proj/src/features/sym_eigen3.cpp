#include "features/sym_eigen3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lidarsphere {
namespace {

using V3 = std::array<double, 3>;

V3 cross(const V3& u, const V3& v) {
  return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}
double dot(const V3& u, const V3& v) { return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]; }
V3 scale(const V3& u, double s) { return {u[0] * s, u[1] * s, u[2] * s}; }

V3 mul(const Mat3& a, const V3& v) {
  return {a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2], a[0][1] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
          a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2]};
}

// Eigenvector for a simple eigenvalue: the rows of (A - eval I) span the
// orthogonal complement, so the largest cross product of two rows is parallel
// to the eigenvector.
V3 eigenvector_from_rows(const Mat3& a, double eval) {
  const V3 r0{a[0][0] - eval, a[0][1], a[0][2]};
  const V3 r1{a[0][1], a[1][1] - eval, a[1][2]};
  const V3 r2{a[0][2], a[1][2], a[2][2] - eval};
  const V3 c01 = cross(r0, r1), c02 = cross(r0, r2), c12 = cross(r1, r2);
  const double d01 = dot(c01, c01), d02 = dot(c02, c02), d12 = dot(c12, c12);
  if (d01 >= d02 && d01 >= d12 && d01 > 0) return scale(c01, 1.0 / std::sqrt(d01));
  if (d02 >= d12 && d02 > 0) return scale(c02, 1.0 / std::sqrt(d02));
  if (d12 > 0) return scale(c12, 1.0 / std::sqrt(d12));
  return {1.0, 0.0, 0.0};
}

void orthogonal_complement(const V3& w, V3& u, V3& v) {
  if (std::fabs(w[0]) > std::fabs(w[1])) {
    const double inv = 1.0 / std::sqrt(w[0] * w[0] + w[2] * w[2]);
    u = {-w[2] * inv, 0.0, w[0] * inv};
  } else {
    const double inv = 1.0 / std::sqrt(w[1] * w[1] + w[2] * w[2]);
    u = {0.0, w[2] * inv, -w[1] * inv};
  }
  v = cross(w, u);
}

// Eigenvector of eval1 restricted to the plane orthogonal to the known evec0.
V3 second_eigenvector(const Mat3& a, const V3& evec0, double eval1) {
  V3 u, v;
  orthogonal_complement(evec0, u, v);
  const V3 au = mul(a, u), av = mul(a, v);
  double m00 = dot(u, au) - eval1;
  double m01 = dot(u, av);
  double m11 = dot(v, av) - eval1;
  const double a00 = std::fabs(m00), a01 = std::fabs(m01), a11 = std::fabs(m11);
  if (a00 >= a11) {
    if (std::max(a00, a01) <= 0) return u;
    if (a00 >= a01) {
      m01 /= m00;
      m00 = 1.0 / std::sqrt(1.0 + m01 * m01);
      m01 *= m00;
    } else {
      m00 /= m01;
      m01 = 1.0 / std::sqrt(1.0 + m00 * m00);
      m00 *= m01;
    }
    return {m01 * u[0] - m00 * v[0], m01 * u[1] - m00 * v[1], m01 * u[2] - m00 * v[2]};
  }
  if (std::max(a11, a01) <= 0) return u;
  if (a11 >= a01) {
    m01 /= m11;
    m11 = 1.0 / std::sqrt(1.0 + m01 * m01);
    m01 *= m11;
  } else {
    m11 /= m01;
    m01 = 1.0 / std::sqrt(1.0 + m11 * m11);
    m11 *= m01;
  }
  return {m11 * u[0] - m01 * v[0], m11 * u[1] - m01 * v[1], m11 * u[2] - m01 * v[2]};
}

void canonical_sign(V3& v) {
  for (double c : v) {
    if (c > 0) return;
    if (c < 0) {
      v = scale(v, -1.0);
      return;
    }
  }
}

}  // namespace

SymEigen3 sym_eigen3(const Mat3& in) {
  SymEigen3 out;
  double max_abs = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = r; c < 3; ++c) max_abs = std::max(max_abs, std::fabs(in[r][c]));
  if (max_abs == 0.0) {
    out.values = {0.0, 0.0, 0.0};
    out.vectors = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    return out;
  }
  Mat3 a{};
  for (int r = 0; r < 3; ++r)
    for (int c = r; c < 3; ++c) a[r][c] = a[c][r] = in[r][c] / max_abs;

  const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  if (off == 0.0) {
    // Diagonal: eigenvectors are the axes; sort by value, axis index on ties.
    std::array<int, 3> idx{0, 1, 2};
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return a[x][x] < a[y][y]; });
    for (int k = 0; k < 3; ++k) {
      out.values[k] = a[idx[k]][idx[k]] * max_abs;
      out.vectors[k] = {0, 0, 0};
      out.vectors[k][idx[k]] = 1.0;
    }
    return out;
  }

  const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
  const double b00 = a[0][0] - q, b11 = a[1][1] - q, b22 = a[2][2] - q;
  const double p = std::sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off) / 6.0);
  const double c00 = b11 * b22 - a[1][2] * a[1][2];
  const double c01 = a[0][1] * b22 - a[1][2] * a[0][2];
  const double c02 = a[0][1] * a[1][2] - b11 * a[0][2];
  const double det = (b00 * c00 - a[0][1] * c01 + a[0][2] * c02) / (p * p * p);
  const double half_det = std::clamp(0.5 * det, -1.0, 1.0);
  const double angle = std::acos(half_det) / 3.0;
  constexpr double kTwoThirdsPi = 2.0 * std::numbers::pi / 3.0;
  const double beta2 = 2.0 * std::cos(angle);
  const double beta0 = 2.0 * std::cos(angle + kTwoThirdsPi);
  const double beta1 = -(beta0 + beta2);
  const double e0 = q + p * beta0, e1 = q + p * beta1, e2 = q + p * beta2;

  V3 v0, v1, v2;
  if (half_det >= 0.0) {
    v2 = eigenvector_from_rows(a, e2);
    v1 = second_eigenvector(a, v2, e1);
    v0 = cross(v1, v2);
  } else {
    v0 = eigenvector_from_rows(a, e0);
    v1 = second_eigenvector(a, v0, e1);
    v2 = cross(v0, v1);
  }
  // The trigonometric values lose about half their digits near a repeated
  // root; Rayleigh quotients of the (accurate) vectors do not.
  std::array<V3, 3> vecs{v0, v1, v2};
  std::array<double, 3> vals{};
  for (int k = 0; k < 3; ++k) vals[k] = dot(vecs[k], mul(a, vecs[k]));
  std::array<int, 3> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return vals[x] < vals[y]; });
  for (int k = 0; k < 3; ++k) {
    out.values[k] = vals[idx[k]] * max_abs;
    out.vectors[k] = vecs[idx[k]];
    canonical_sign(out.vectors[k]);
  }
  return out;
}

}  // namespace lidarsphere
