#pragma once

// Instance generators and independent reference computations for the tests.
// Everything here uses std::mt19937_64 and textbook dense loops so it never
// shares a code path with the library under test.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <random>
#include <vector>

#include "kaczlab/linalg.hpp"
#include "kaczlab/permutation.hpp"

namespace kaczlab::testing {

inline DenseMatrix random_matrix(std::size_t m, std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> d;
  DenseMatrix A(m, n);
  for (double& v : A.data())
    v = d(gen);
  return A;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> d;
  Vector v(n);
  for (double& x : v)
    x = d(gen);
  return v;
}

// Product of Gaussian factors: rank r with probability one.
inline DenseMatrix random_rank_matrix(std::size_t m, std::size_t n, std::size_t r, std::mt19937_64& gen) {
  return multiply(random_matrix(m, r, gen), random_matrix(r, n, gen));
}

// m x n with orthonormal rows (m <= n), by Gram-Schmidt on Gaussian rows.
inline DenseMatrix orthonormal_rows(std::size_t m, std::size_t n, std::mt19937_64& gen) {
  DenseMatrix Q = random_matrix(m, n, gen);
  for (std::size_t i = 0; i < m; ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < i; ++k) {
        double p = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          p += Q(i, j) * Q(k, j);
        for (std::size_t j = 0; j < n; ++j)
          Q(i, j) -= p * Q(k, j);
      }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      s += Q(i, j) * Q(i, j);
    s = std::sqrt(s);
    for (std::size_t j = 0; j < n; ++j)
      Q(i, j) /= s;
  }
  return Q;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t m, std::mt19937_64& gen) {
  std::vector<std::size_t> v(m);
  for (std::size_t i = 0; i < m; ++i)
    v[i] = i;
  for (std::size_t i = m - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i);
    std::swap(v[i], v[d(gen)]);
  }
  return v;
}

inline DenseMatrix naive_product(const DenseMatrix& A, const DenseMatrix& B) {
  DenseMatrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < B.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < A.cols(); ++k)
        s += A(i, k) * B(k, j);
      C(i, j) = s;
    }
  return C;
}

inline double frobenius_distance(const DenseMatrix& A, const DenseMatrix& B) {
  double s = 0.0;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) {
      const double d = A(i, j) - B(i, j);
      s += d * d;
    }
  return std::sqrt(s);
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double euclid(const Vector& v) {
  double s = 0.0;
  for (double x : v)
    s += x * x;
  return std::sqrt(s);
}

// The explicit projector chain (I - a a^T/|a|^2) ... applied in visiting
// order, built as full n x n matrices and multiplied naively.
inline DenseMatrix explicit_projector_chain(const DenseMatrix& A, const std::vector<std::size_t>& order) {
  const std::size_t n = A.cols();
  DenseMatrix T = DenseMatrix::identity(n);
  for (std::size_t i : order) {
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      sq += A(i, j) * A(i, j);
    DenseMatrix P = DenseMatrix::identity(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        P(r, c) -= A(i, r) * A(i, c) / sq;
    T = naive_product(P, T);
  }
  return T;
}

// The 3 x 2 matrix used throughout for reference contraction factors.
inline DenseMatrix example_matrix() { return DenseMatrix{{6, 4}, {10, 4}, {5, 8}}; }

// Fresh scratch directory, removed with its contents on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("kaczlab_" + tag + "_" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace kaczlab::testing
