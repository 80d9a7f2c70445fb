#include "balcons/core.hpp"

#include <cmath>

namespace balcons {

Mat4 mat4_identity() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

Mat5 mat5_identity() {
  Mat5 m{};
  for (int i = 0; i < 5; ++i) m[i][i] = 1.0;
  return m;
}

namespace {

// Gauss-Jordan with partial pivoting, sized for the tiny matrices used here.
template <std::size_t N>
std::array<std::array<double, N>, N> small_inverse(
    std::array<std::array<double, N>, N> a) {
  std::array<std::array<double, N>, N> inv{};
  for (std::size_t i = 0; i < N; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-300)
      fail(ErrorKind::SingularMap, "singular matrix in map inversion");
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double scale = 1.0 / a[col][col];
    for (std::size_t c = 0; c < N; ++c) {
      a[col][c] *= scale;
      inv[col][c] *= scale;
    }
    for (std::size_t r = 0; r < N; ++r) {
      if (r == col) continue;
      const double factor = a[r][col];
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < N; ++c) {
        a[r][c] -= factor * a[col][c];
        inv[r][c] -= factor * inv[col][c];
      }
    }
  }
  return inv;
}

}  // namespace

Mat4 mat4_inverse(const Mat4& m) { return small_inverse<4>(m); }
Mat5 mat5_inverse(const Mat5& m) { return small_inverse<5>(m); }

Vec4 mat4_apply(const Mat4& m, const Vec4& v) {
  Vec4 out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[r] += m[r][c] * v[c];
  return out;
}

Vec5 mat5_apply(const Mat5& m, const Vec5& v) {
  Vec5 out{};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) out[r] += m[r][c] * v[c];
  return out;
}

double mat4_det(const Mat4& m) {
  // Direct LU-style elimination on a copy.
  Mat4 a = m;
  double det = 1.0;
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0) return 0.0;
    if (pivot != col) {
      std::swap(a[col], a[pivot]);
      det = -det;
    }
    det *= a[col][col];
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return det;
}

}  // namespace balcons
