#pragma once

// Dense kernels and the seeded random-number contract used by every other
// module. Everything here is plain 64-bit floating point, row-major.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decgdmin/error.hpp"

namespace decgdmin {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(Errc::ShapeMismatch, "matrix data length does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix eye(n, n);
    for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
    return eye;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix out(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(Errc::ShapeMismatch, "ragged initializer");
      std::size_t j = 0;
      for (double v : row) out(i, j++) = v;
      ++i;
    }
    return out;
  }

  static Matrix diagonal(std::span<const double> values) {
    Matrix out(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out(i, i) = values[i];
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vector column(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }
  void set_column(std::size_t j, std::span<const double> values) {
    if (values.size() != rows_) throw Error(Errc::ShapeMismatch, "set_column length");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& values() const noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += s * other
  void add_scaled(double s, const Matrix& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  void require_same_shape(const Matrix& other) const {
    if (!same_shape(other)) throw Error(Errc::ShapeMismatch, "matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::ShapeMismatch, "matmul inner dimensions");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

/// aᵀ·b without materializing the transpose.
inline Matrix transpose_times(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(Errc::ShapeMismatch, "transpose_times row counts");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(Errc::ShapeMismatch, "matvec dimensions");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += arow[j] * x[j];
    y[i] = acc;
  }
  return y;
}

/// aᵀ·x
inline Vector transpose_times(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw Error(Errc::ShapeMismatch, "transposed matvec dimensions");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto arow = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += arow[j] * xi;
  }
  return y;
}

inline double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.values()) acc += v * v;
  return std::sqrt(acc);
}

inline double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double trace(const Matrix& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) acc += m(i, i);
  return acc;
}

inline bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Householder QR

namespace detail {

// Compact Householder factorization of an n×r matrix (n ≥ r). Reflector k is
// I − 2 v_k v_kᵀ with unit v_k supported on rows k..n−1. A zero column
// below the diagonal gets an identity reflector (empty v).
struct HouseholderFactors {
  std::size_t n = 0;
  std::size_t r = 0;
  std::vector<Vector> reflectors;
  Matrix upper;  // r×r, not yet sign-normalized
};

inline HouseholderFactors householder(const Matrix& m) {
  const std::size_t n = m.rows();
  const std::size_t r = m.cols();
  Matrix a = m;
  HouseholderFactors f;
  f.n = n;
  f.r = r;
  f.reflectors.resize(r);
  for (std::size_t k = 0; k < r; ++k) {
    double norm_x = 0.0;
    for (std::size_t i = k; i < n; ++i) norm_x += a(i, k) * a(i, k);
    norm_x = std::sqrt(norm_x);
    if (norm_x == 0.0) continue;
    Vector v(n - k);
    for (std::size_t i = k; i < n; ++i) v[i - k] = a(i, k);
    const double alpha = v[0] >= 0.0 ? -norm_x : norm_x;
    v[0] -= alpha;
    const double vnorm = norm2(v);
    if (vnorm == 0.0) continue;
    for (double& x : v) x /= vnorm;
    for (std::size_t j = k; j < r; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i - k] * a(i, j);
      s *= 2.0;
      for (std::size_t i = k; i < n; ++i) a(i, j) -= s * v[i - k];
    }
    f.reflectors[k] = std::move(v);
  }
  f.upper = Matrix(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j) f.upper(i, j) = a(i, j);
  return f;
}

inline void apply_reflector(const Vector& v, std::size_t k, std::span<double> x) {
  if (v.empty()) return;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * x[k + i];
  s *= 2.0;
  for (std::size_t i = 0; i < v.size(); ++i) x[k + i] -= s * v[i];
}

// min |R_kk| ≤ tol · max |R_kk| certifies σ_min ≤ tol · σ_max, since the
// diagonal of a triangular factor is bracketed by its extreme singular values.
inline bool diagonal_rank_deficient(const Matrix& upper, double tol) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t k = 0; k < upper.rows(); ++k) {
    const double d = std::abs(upper(k, k));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return upper.rows() > 0 && (hi == 0.0 || lo <= tol * hi);
}

}  // namespace detail

struct QrResult {
  Matrix q;  // n×r, orthonormal columns
  Matrix r;  // r×r upper triangular, positive diagonal
};

/// Thin QR by Householder reflections with diag(R) > 0.
/// Throws RankDeficient when M is numerically rank deficient (1e-12 relative).
inline QrResult thin_qr(const Matrix& m) {
  const std::size_t n = m.rows();
  const std::size_t r = m.cols();
  if (n < r) throw Error(Errc::InvalidDimensions, "thin_qr needs rows >= cols");
  if (!all_finite(m)) throw Error(Errc::RankDeficient, "thin_qr input is not finite");
  auto f = detail::householder(m);
  if (detail::diagonal_rank_deficient(f.upper, 1e-12))
    throw Error(Errc::RankDeficient, "matrix is numerically rank deficient");

  // Q = H_0 H_1 ... H_{r-1} applied to the first r columns of I_n.
  Matrix q(n, r);
  Vector col(n);
  for (std::size_t j = 0; j < r; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    for (std::size_t k = r; k-- > 0;) detail::apply_reflector(f.reflectors[k], k, col);
    q.set_column(j, col);
  }
  for (std::size_t k = 0; k < r; ++k) {
    if (f.upper(k, k) < 0.0) {
      for (std::size_t j = k; j < r; ++j) f.upper(k, j) = -f.upper(k, j);
      for (std::size_t i = 0; i < n; ++i) q(i, k) = -q(i, k);
    }
  }
  return {std::move(q), std::move(f.upper)};
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)

struct EigResult {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

inline EigResult sym_eig(const Matrix& s) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw Error(Errc::NotSymmetric, "matrix is not square");
  const double fro = frobenius_norm(s);
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = s(i, j) - s(j, i);
      asym += d * d;
    }
  if (std::sqrt(asym) > 1e-10 * fro) throw Error(Errc::NotSymmetric, "matrix is not symmetric");

  Matrix a = s;
  // symmetrize exactly so rotations act on a truly symmetric matrix
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (s(i, j) + s(j, i));
  Matrix v = Matrix::identity(n);

  const double threshold = 1e-12 * fro;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= threshold) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
  }
  return out;
}

/// sqrt(λ_max(MᵀM)) from the small Gram matrix.
inline double spectral_norm(const Matrix& m) {
  if (m.empty()) return 0.0;
  const Matrix gram = m.rows() >= m.cols() ? transpose_times(m, m) : m * m.transpose();
  const auto eig = sym_eig(gram);
  return std::sqrt(std::max(eig.values.front(), 0.0));
}

/// Extreme singular values (σ_max, σ_min) of a matrix via its Gram matrix.
inline std::pair<double, double> extreme_singular_values(const Matrix& m) {
  const Matrix gram = m.rows() >= m.cols() ? transpose_times(m, m) : m * m.transpose();
  const auto eig = sym_eig(gram);
  return {std::sqrt(std::max(eig.values.front(), 0.0)),
          std::sqrt(std::max(eig.values.back(), 0.0))};
}

// ---------------------------------------------------------------------------
// Least squares

/// argmin_b ||y − A b||₂ through Householder QR of A.
/// Throws SingularSystem when λ_min(AᵀA) ≤ 1e-12 · λ_max(AᵀA).
inline Vector least_squares(const Matrix& a, std::span<const double> y) {
  const std::size_t m = a.rows();
  const std::size_t r = a.cols();
  if (y.size() != m) throw Error(Errc::ShapeMismatch, "least_squares rhs length");
  if (m < r) throw Error(Errc::SingularSystem, "underdetermined system");
  const auto gram_eig = sym_eig(transpose_times(a, a));
  if (!(gram_eig.values.back() > 1e-12 * gram_eig.values.front()))
    throw Error(Errc::SingularSystem, "normal matrix is numerically singular");

  auto f = detail::householder(a);
  Vector qty(y.begin(), y.end());
  for (std::size_t k = 0; k < r; ++k) detail::apply_reflector(f.reflectors[k], k, qty);
  Vector b(r, 0.0);
  for (std::size_t i = r; i-- > 0;) {
    double acc = qty[i];
    for (std::size_t j = i + 1; j < r; ++j) acc -= f.upper(i, j) * b[j];
    b[i] = acc / f.upper(i, i);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Gaussian tail helpers

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// E[ζ² 1{|ζ| ≤ c}] for ζ ~ N(0,1): (2Φ(c) − 1) − 2cφ(c).
inline double truncated_gauss_second_moment(double c) {
  if (c < 0.0) throw Error(Errc::InvalidDimensions, "truncation level must be >= 0");
  if (c == 0.0) return 0.0;
  const double mass = std::erf(c / std::sqrt(2.0));
  return std::clamp(mass - 2.0 * c * standard_normal_pdf(c), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Random streams

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// A reproducible stream identified by (seed, stream_id).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, seeded from a splitmix64 mix of both identifiers. Uniforms use
/// the top 53 bits mapped to (0, 1]. Normals come from Box–Muller in pairs:
/// the cosine branch is returned first, then the cached sine branch.
class RngStream {
 public:
  static constexpr std::string_view algorithm_tag = "mt19937_64/splitmix64/box-muller-v1";

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(splitmix64(seed ^ splitmix64(stream_id))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Independent child stream; the parent's state is not consumed.
  RngStream substream(std::uint64_t child) const {
    return RngStream(seed_, splitmix64(stream_id_ * 0x100000001B3ULL ^ splitmix64(child + 1)));
  }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * (1.0 / 9007199254740992.0);
  }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// i.i.d. N(0,1) entries filled row-major from a fresh copy of `stream`.
inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream stream) {
  Matrix out(rows, cols);
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = stream.normal();
  return out;
}

}  // namespace decgdmin
