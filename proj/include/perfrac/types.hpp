#pragma once

#include <cmath>
#include <cstdint>

namespace perfrac {

using Index = std::int32_t;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Dense 2x2 matrix, row-major.
struct Mat2 {
  double a11 = 1.0, a12 = 0.0;
  double a21 = 0.0, a22 = 1.0;

  static Mat2 identity() { return {}; }
  static Mat2 diagonal(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
  static Mat2 scalar(double m) { return {m, 0.0, 0.0, m}; }

  Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
  friend Mat2 operator*(double s, const Mat2& m) {
    return {s * m.a11, s * m.a12, s * m.a21, s * m.a22};
  }
  friend bool operator==(const Mat2&, const Mat2&) = default;

  Mat2 transposed() const { return {a11, a21, a12, a22}; }
  Mat2 symmetrized() const {
    const double off = 0.5 * (a12 + a21);
    return {a11, off, off, a22};
  }
  bool is_symmetric(double tol) const { return std::abs(a12 - a21) <= tol; }
  bool is_spd() const {
    return is_symmetric(1e-12 * (std::abs(a11) + std::abs(a22))) && a11 > 0.0 &&
           a11 * a22 - a12 * a21 > 0.0;
  }
  /// Eigenvalues of the symmetric part, ascending.
  void eigenvalues(double& lo, double& hi) const {
    const Mat2 s = symmetrized();
    const double mean = 0.5 * (s.a11 + s.a22);
    const double rad = std::hypot(0.5 * (s.a11 - s.a22), s.a12);
    lo = mean - rad;
    hi = mean + rad;
  }
  double max_abs_diff(const Mat2& o) const {
    return std::fmax(std::fmax(std::abs(a11 - o.a11), std::abs(a12 - o.a12)),
                     std::fmax(std::abs(a21 - o.a21), std::abs(a22 - o.a22)));
  }
};

}  // namespace perfrac
