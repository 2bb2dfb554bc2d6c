#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "kaczlab/errors.hpp"

namespace kaczlab {

using Vector = std::vector<double>;

// Row-major dense real matrix. A default-constructed matrix is empty (0x0)
// and only serves as a placeholder; every other constructor requires
// rows >= 1 and cols >= 1.
class DenseMatrix {
public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(check_dims(rows, cols), fill) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != check_dims(rows, cols))
      throw InputError("matrix data length does not match rows * cols");
  }

  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows.size() == 0 ? 0 : rows.begin()->size();
    check_dims(rows_, cols_);
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_)
        throw InputError("ragged initializer for DenseMatrix");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i)
      I(i, i) = 1.0;
    return I;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        t(j, i) = (*this)(i, j);
    return t;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
  static std::size_t check_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0)
      throw InputError("matrix dimensions must be at least 1x1");
    return rows * cols;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Vector helpers

inline double dot(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) noexcept {
  // Scaled to avoid overflow for very large entries.
  double scale = 0.0;
  for (double v : x)
    scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale))
    return scale;
  double s = 0.0;
  for (double v : x) {
    const double t = v / scale;
    s += t * t;
  }
  return scale * std::sqrt(s);
}

inline Vector subtract(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw InputError("vector length mismatch");
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    r[i] = x[i] - y[i];
  return r;
}

inline Vector add(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw InputError("vector length mismatch");
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    r[i] = x[i] + y[i];
  return r;
}

inline Vector scaled(std::span<const double> x, double alpha) {
  Vector r(x.begin(), x.end());
  for (double& v : r)
    v *= alpha;
  return r;
}

inline double distance(std::span<const double> x, std::span<const double> y) {
  return norm2(subtract(x, y));
}

// ---------------------------------------------------------------------------
// Matrix helpers

inline Vector multiply(const DenseMatrix& A, std::span<const double> x) {
  if (A.cols() != x.size())
    throw InputError("matrix-vector dimension mismatch");
  Vector y(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    y[i] = dot(A.row(i), x);
  return y;
}

// A^T y without forming the transpose.
inline Vector multiply_transposed(const DenseMatrix& A, std::span<const double> y) {
  if (A.rows() != y.size())
    throw InputError("transposed matrix-vector dimension mismatch");
  Vector x(A.cols(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const auto r = A.row(i);
    for (std::size_t j = 0; j < A.cols(); ++j)
      x[j] += y[i] * r[j];
  }
  return x;
}

inline DenseMatrix multiply(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows())
    throw InputError("matrix-matrix dimension mismatch");
  DenseMatrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double a = A(i, k);
      if (a == 0.0)
        continue;
      for (std::size_t j = 0; j < B.cols(); ++j)
        C(i, j) += a * B(k, j);
    }
  return C;
}

inline DenseMatrix subtract(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw InputError("matrix shape mismatch");
  DenseMatrix C = A;
  auto c = C.data();
  auto b = B.data();
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] -= b[i];
  return C;
}

inline double frobenius_norm(const DenseMatrix& A) noexcept { return norm2(A.data()); }

// ---------------------------------------------------------------------------
// Singular value decomposition

struct SvdResult {
  DenseMatrix left_vectors;   // U, m x m orthogonal
  Vector singular_values;     // min(m, n) values, nonincreasing
  DenseMatrix right_vectors;  // V, n x n orthogonal
  std::size_t numerical_rank = 0;
  double rank_tolerance = 0.0;
};

namespace detail {

// Fills the columns of Q flagged invalid so that Q becomes orthogonal. Each
// new column starts from the standard basis vector e_i with the largest
// residual 1 - sum_k Q(i,k)^2 over accepted columns, orthogonalized twice.
inline void complete_orthonormal_columns(DenseMatrix& Q, std::vector<bool>& valid) {
  const std::size_t d = Q.rows();
  std::vector<Vector> basis;
  Vector leftover(d, 1.0);
  auto accept = [&](Vector v) {
    for (std::size_t r = 0; r < d; ++r)
      leftover[r] -= v[r] * v[r];
    basis.push_back(std::move(v));
  };
  for (std::size_t c = 0; c < Q.cols(); ++c)
    if (valid[c]) {
      Vector v(d);
      for (std::size_t r = 0; r < d; ++r)
        v[r] = Q(r, c);
      accept(std::move(v));
    }

  for (std::size_t c = 0; c < Q.cols(); ++c) {
    if (valid[c])
      continue;
    const auto e = static_cast<std::size_t>(std::max_element(leftover.begin(), leftover.end()) - leftover.begin());
    Vector v(d, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& q : basis) {
        const double proj = dot(q, v);
        for (std::size_t r = 0; r < d; ++r)
          v[r] -= proj * q[r];
      }
    const double nv = norm2(v);
    for (std::size_t r = 0; r < d; ++r) {
      v[r] /= nv;
      Q(r, c) = v[r];
    }
    valid[c] = true;
    accept(std::move(v));
  }
}

// One-sided (Hestenes) Jacobi on a tall matrix (m >= n). Returns U (m x m),
// singular values (n) and V (n x n).
inline SvdResult jacobi_svd_tall(const DenseMatrix& A) {
  const std::size_t m = A.rows();
  const std::size_t n = A.cols();
  constexpr double eps = std::numeric_limits<double>::epsilon();

  // Column-major working copies: W holds A V, column j contiguous.
  std::vector<double> W(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      W[j * m + i] = A(i, j);
  std::vector<double> V(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    V[j * n + j] = 1.0;

  auto col = [](std::vector<double>& M, std::size_t len, std::size_t j) {
    return std::span<double>(M.data() + j * len, len);
  };

  constexpr int max_sweeps = 80;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = col(W, m, p);
        auto wq = col(W, m, q);
        const double alpha = dot(wp, wp);
        const double beta = dot(wq, wq);
        const double gamma = dot(wp, wq);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta))
          continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double a = wp[i];
          const double b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        auto vp = col(V, n, p);
        auto vq = col(V, n, q);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i];
          const double b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
    if (!rotated)
      break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j)
    sigma[j] = norm2(col(W, m, j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  SvdResult r;
  r.singular_values.resize(n);
  r.right_vectors = DenseMatrix(n, n);
  r.left_vectors = DenseMatrix(m, m);
  const double smax = n > 0 ? sigma[order[0]] : 0.0;
  // Columns this small carry no reliable direction; they are rebuilt by completion.
  const double direction_floor = smax * eps * static_cast<double>(std::max(m, n));
  std::vector<bool> valid(m, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    r.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i)
      r.right_vectors(i, k) = V[j * n + i];
    if (sigma[j] > direction_floor && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i)
        r.left_vectors(i, k) = W[j * m + i] / sigma[j];
      valid[k] = true;
    }
  }
  complete_orthonormal_columns(r.left_vectors, valid);
  return r;
}

}  // namespace detail

// Full SVD A = U diag(s) V^T by one-sided Jacobi rotations. The numerical rank
// counts singular values above max(m, n) * s_max * 2^-52.
inline SvdResult svd(const DenseMatrix& A) {
  if (A.empty())
    throw InputError("svd of an empty matrix");
  if (!A.all_finite())
    throw InputError("svd input contains non-finite entries");

  SvdResult r;
  if (A.rows() >= A.cols()) {
    r = detail::jacobi_svd_tall(A);
  } else {
    r = detail::jacobi_svd_tall(A.transposed());
    std::swap(r.left_vectors, r.right_vectors);
  }
  const double smax = r.singular_values.front();
  r.rank_tolerance = static_cast<double>(std::max(A.rows(), A.cols())) * smax *
                     std::numeric_limits<double>::epsilon();
  r.numerical_rank = static_cast<std::size_t>(
      std::count_if(r.singular_values.begin(), r.singular_values.end(),
                    [&](double s) { return s > r.rank_tolerance; }));
  return r;
}

// Moore-Penrose pseudoinverse from an existing decomposition.
inline DenseMatrix pseudoinverse(const SvdResult& d) {
  const std::size_t m = d.left_vectors.rows();
  const std::size_t n = d.right_vectors.rows();
  DenseMatrix P(n, m);
  for (std::size_t k = 0; k < d.numerical_rank; ++k) {
    const double inv = 1.0 / d.singular_values[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = d.right_vectors(i, k) * inv;
      if (v == 0.0)
        continue;
      for (std::size_t j = 0; j < m; ++j)
        P(i, j) += v * d.left_vectors(j, k);
    }
  }
  return P;
}

inline DenseMatrix pseudoinverse(const DenseMatrix& A) { return pseudoinverse(svd(A)); }

inline double spectral_norm(const DenseMatrix& M) { return svd(M).singular_values.front(); }

// Power iteration on M^T M. Fast path for the spectral norm; the SVD route
// above is the reference. Start vector is fixed so the result is reproducible.
inline double spectral_norm_power(const DenseMatrix& M, std::size_t max_iterations = 10000,
                                  double relative_tolerance = 1e-14) {
  if (M.empty())
    throw InputError("spectral norm of an empty matrix");
  if (!M.all_finite())
    throw InputError("spectral norm input contains non-finite entries");
  const std::size_t n = M.cols();
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
  double nv = norm2(v);
  for (double& x : v)
    x /= nv;

  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Vector w = multiply_transposed(M, multiply(M, v));
    const double nw = norm2(w);
    if (nw == 0.0)
      return 0.0;
    const double next = std::sqrt(nw);  // ||M^T M v|| -> sigma_max^2 as v converges
    for (std::size_t i = 0; i < n; ++i)
      v[i] = w[i] / nw;
    if (std::abs(next - estimate) <= relative_tolerance * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

inline double min_nonzero_singular_value(const SvdResult& d) {
  if (d.numerical_rank == 0)
    throw DomainError("matrix has no nonzero singular value");
  return d.singular_values[d.numerical_rank - 1];
}

inline double min_nonzero_singular_value(const DenseMatrix& A) {
  return min_nonzero_singular_value(svd(A));
}

// A^+ A, formed as V_r V_r^T so the result is exactly symmetric.
inline DenseMatrix row_space_projector(const SvdResult& d) {
  const std::size_t n = d.right_vectors.rows();
  DenseMatrix P(n, n);
  for (std::size_t k = 0; k < d.numerical_rank; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = d.right_vectors(i, k);
      for (std::size_t j = 0; j < n; ++j)
        P(i, j) += vi * d.right_vectors(j, k);
    }
  return P;
}

inline DenseMatrix row_space_projector(const DenseMatrix& A) { return row_space_projector(svd(A)); }

}  // namespace kaczlab
