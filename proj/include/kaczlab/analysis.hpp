#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "kaczlab/errors.hpp"
#include "kaczlab/linalg.hpp"
#include "kaczlab/permutation.hpp"
#include "kaczlab/solver.hpp"

namespace kaczlab {

// Absolute tolerance used for every consistency test b in Range(A).
inline constexpr double consistency_tolerance = 1e-8;

// Default ceiling on m for exhaustive enumeration of S_m (9! = 362880).
inline constexpr std::size_t default_enumeration_limit = 9;

// ---------------------------------------------------------------------------
// Solutions

namespace detail {

inline void require_consistent(const DenseMatrix& A, const DenseMatrix& pinv, std::span<const double> b) {
  const Vector fitted = multiply(A, multiply(pinv, b));
  const double gap = distance(fitted, b);
  if (gap > consistency_tolerance * (1.0 + norm2(b)))
    throw ConsistencyError(gap);
}

}  // namespace detail

// A^+ b, after checking that b lies in Range(A).
inline Vector least_norm_solution(const DenseMatrix& A, std::span<const double> b) {
  if (b.size() != A.rows())
    throw InputError("right-hand side length does not match the row count");
  const DenseMatrix pinv = pseudoinverse(A);
  detail::require_consistent(A, pinv, b);
  return multiply(pinv, b);
}

// Orthogonal projection of x0 onto {x : Ax = b}, i.e. A^+ b + (I - A^+ A) x0.
inline Vector projected_start(const DenseMatrix& A, std::span<const double> b, std::span<const double> x0) {
  if (b.size() != A.rows() || x0.size() != A.cols())
    throw InputError("dimension mismatch in projected_start");
  const DenseMatrix pinv = pseudoinverse(A);
  detail::require_consistent(A, pinv, b);
  return add(multiply(pinv, subtract(b, multiply(A, x0))), x0);
}

// Relative solution error ||x - ref||^2 / ||x0 - ref||^2.
inline double rse(std::span<const double> x, std::span<const double> reference, std::span<const double> x0) {
  const double den = distance(x0, reference);
  if (den == 0.0)
    throw DomainError("relative solution error undefined: x0 equals the reference");
  const double num = distance(x, reference);
  return (num * num) / (den * den);
}

// ---------------------------------------------------------------------------
// Epoch operators

// One epoch written as the affine map x -> T x + g.
struct EpochOperator {
  DenseMatrix T;
  Vector g;
  Permutation permutation;

  Vector apply(std::span<const double> x) const { return add(multiply(T, x), g); }
};

namespace detail {

// M <- (I - u u^T) M for a unit vector u.
inline void apply_projector_left(DenseMatrix& M, std::span<const double> u) {
  const std::size_t n = M.rows();
  std::vector<double> w(M.cols(), 0.0);  // u^T M
  for (std::size_t i = 0; i < n; ++i) {
    const double ui = u[i];
    if (ui == 0.0)
      continue;
    const auto r = M.row(i);
    for (std::size_t j = 0; j < w.size(); ++j)
      w[j] += ui * r[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double ui = u[i];
    if (ui == 0.0)
      continue;
    auto r = M.row(i);
    for (std::size_t j = 0; j < w.size(); ++j)
      r[j] -= ui * w[j];
  }
}

inline std::vector<Vector> unit_rows(const DenseMatrix& A) {
  std::vector<Vector> rows(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double nrm = norm2(A.row(i));
    if (!(nrm > 0.0))
      throw ZeroRowError(i);
    rows[i] = scaled(A.row(i), 1.0 / nrm);
  }
  return rows;
}

}  // namespace detail

// T = (I - P_{pi_m}) ... (I - P_{pi_1}) and the matching offset g, so that a
// Kaczmarz sweep in order pi maps x to T x + g.
inline EpochOperator epoch_operator(const DenseMatrix& A, std::span<const double> b, const Permutation& order) {
  if (b.size() != A.rows())
    throw InputError("right-hand side length does not match the row count");
  if (order.size() != A.rows())
    throw InputError("permutation size does not match the row count");
  const auto units = detail::unit_rows(A);
  const std::size_t n = A.cols();
  EpochOperator op{DenseMatrix::identity(n), Vector(n, 0.0), order};
  for (std::size_t i : order) {
    const auto& u = units[i];
    detail::apply_projector_left(op.T, u);
    // g <- (I - u u^T) g + (b_i / ||a_i||^2) a_i, where (b_i/||a_i||^2) a_i = (b_i/||a_i||) u
    const double ug = dot(u, op.g);
    const double shift = b[i] / norm2(A.row(i));
    for (std::size_t j = 0; j < n; ++j)
      op.g[j] += (shift - ug) * u[j];
  }
  return op;
}

// Evaluates ||T_pi A^+ A||_2 for many permutations of one matrix, reusing the
// normalized rows and the row-space projector.
class ContractionEvaluator {
public:
  explicit ContractionEvaluator(const DenseMatrix& A)
      : units_(detail::unit_rows(A)), projector_(kaczlab::row_space_projector(A)) {}

  std::size_t rows() const noexcept { return units_.size(); }
  const DenseMatrix& projector() const noexcept { return projector_; }

  double operator()(const Permutation& order) const { return (*this)(order.order()); }

  double operator()(std::span<const std::size_t> order) const {
    if (order.size() != units_.size())
      throw InputError("permutation size does not match the row count");
    DenseMatrix M = projector_;
    for (std::size_t i : order)
      detail::apply_projector_left(M, units_[i]);
    return spectral_norm(M);
  }

private:
  std::vector<Vector> units_;
  DenseMatrix projector_;
};

// ||T_pi A^+ A||_2, the worst-case error shrinkage of one epoch in order pi on
// Range(A^T). Strictly below 1 for any nonzero A without zero rows.
inline double contraction_factor(const DenseMatrix& A, const Permutation& order) {
  return ContractionEvaluator(A)(order);
}

// ---------------------------------------------------------------------------
// Rates

struct SpectralSummary {
  double sigma_min = 0.0;
  double spectral_norm_A = 0.0;
  double frobenius_norm_A = 0.0;
  std::size_t numerical_rank = 0;
  double rho_rk = 0.0;            // sqrt(1 - sigma_min^2 / ||A||_F^2)
  double rho_rk_per_epoch = 0.0;  // rho_rk^m, m single-row steps per epoch
};

inline SpectralSummary rho_rk(const DenseMatrix& A) {
  const SvdResult d = svd(A);
  if (d.numerical_rank == 0)
    throw DomainError("rho_rk of a zero matrix");
  SpectralSummary s;
  s.sigma_min = min_nonzero_singular_value(d);
  s.spectral_norm_A = d.singular_values.front();
  s.frobenius_norm_A = frobenius_norm(A);
  s.numerical_rank = d.numerical_rank;
  const double ratio = (s.sigma_min / s.frobenius_norm_A) * (s.sigma_min / s.frobenius_norm_A);
  s.rho_rk = std::sqrt(std::max(0.0, 1.0 - ratio));
  s.rho_rk_per_epoch = std::pow(s.rho_rk, static_cast<double>(A.rows()));
  return s;
}

inline double rho_ik(const DenseMatrix& A) { return contraction_factor(A, identity_permutation(A.rows())); }

struct RateEntry {
  Permutation permutation;
  double factor = 0.0;
};

struct RateTable {
  std::vector<RateEntry> entries;  // lexicographic order of permutations
  double rho_rrk = 0.0;
  double rho_ik = 0.0;
  std::optional<double> rho_sok;  // for the supplied shuffle-once permutation
  std::optional<Permutation> sok_permutation;
  Permutation argmax;

  // Factor for a given permutation; this is rho_SOK when sigma is a shuffle-once draw.
  double factor_of(const Permutation& sigma) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), sigma,
                                     [](const RateEntry& e, const Permutation& p) { return e.permutation < p; });
    if (it == entries.end() || it->permutation != sigma)
      throw InputError("permutation not in the rate table");
    return it->factor;
  }

  std::vector<RateEntry> sorted_descending() const {
    std::vector<RateEntry> out = entries;
    std::stable_sort(out.begin(), out.end(),
                     [](const RateEntry& a, const RateEntry& b) { return a.factor > b.factor; });
    return out;
  }
};

// Exhaustive rho_RRK = max over S_m of ||T_pi A^+ A||_2. Work is split by the
// leading index across threads; results are merged back in lexicographic order.
inline RateTable rho_rrk(const DenseMatrix& A, std::size_t m_limit = default_enumeration_limit,
                         std::optional<Permutation> shuffle_once = std::nullopt) {
  const std::size_t m = A.rows();
  if (m > m_limit)
    throw CapacityError("exhaustive enumeration needs m <= " + std::to_string(m_limit) + " (got m = " +
                        std::to_string(m) + "); use the sampled estimate instead");
  const ContractionEvaluator eval(A);

  std::vector<std::vector<RateEntry>> parts(m);
  auto enumerate_prefix = [&](std::size_t first) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < m; ++i)
      if (i != first)
        rest.push_back(i);
    std::vector<std::size_t> order(m);
    do {
      order[0] = first;
      std::copy(rest.begin(), rest.end(), order.begin() + 1);
      parts[first].push_back({Permutation(order), eval(order)});
    } while (std::next_permutation(rest.begin(), rest.end()));
  };

  const std::size_t workers = std::min<std::size_t>(m, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1 || m < 6) {
    for (std::size_t f = 0; f < m; ++f)
      enumerate_prefix(f);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t f = w; f < m; f += workers)
          enumerate_prefix(f);
      });
  }

  RateTable table;
  table.entries.reserve([&] {
    std::size_t total = 0;
    for (const auto& p : parts)
      total += p.size();
    return total;
  }());
  for (auto& p : parts)
    std::move(p.begin(), p.end(), std::back_inserter(table.entries));

  const auto best = std::max_element(table.entries.begin(), table.entries.end(),
                                     [](const RateEntry& a, const RateEntry& b) { return a.factor < b.factor; });
  table.rho_rrk = best->factor;
  table.argmax = best->permutation;
  table.rho_ik = table.entries.front().factor;  // identity is lexicographically first
  if (shuffle_once) {
    table.rho_sok = table.factor_of(*shuffle_once);
    table.sok_permutation = std::move(shuffle_once);
  }
  return table;
}

// Max contraction factor over `samples` random permutations: a lower bound on
// rho_RRK for when m! is out of reach.
inline double rho_rrk_sampled(const DenseMatrix& A, std::size_t samples, RngState& rng) {
  if (samples < 1)
    throw DomainError("sampled estimate needs at least one sample");
  const ContractionEvaluator eval(A);
  double best = 0.0;
  for (std::size_t s = 0; s < samples; ++s)
    best = std::max(best, eval(random_permutation(A.rows(), rng)));
  return best;
}

// ---------------------------------------------------------------------------
// Trace verification

struct BoundCheck {
  std::size_t epoch = 0;
  double error_before = 0.0;
  double error_after = 0.0;
  double factor = 0.0;          // ||T_{pi_k} A^+ A||_2 for the logged permutation
  double step_bound = 0.0;      // factor * error_before
  bool step_ok = false;
  std::optional<double> envelope_bound;  // rho_RRK^k * ||x0 - x0_*||
  bool envelope_ok = true;

  bool passed() const noexcept { return step_ok && envelope_ok; }
};

inline constexpr double bound_slack = 1e-9;

inline bool all_passed(std::span<const BoundCheck> checks) {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.passed(); });
}

// Checks every recorded epoch against
//   ||x^{k+1} - x0_*|| <= ||T_{pi_k} A^+ A|| * ||x^k - x0_*||        (per step)
//   ||x^k - x0_*||     <= rho_RRK^k * ||x^0 - x0_*||                (envelope, if rho given)
// with bound_slack added to each right-hand side. The projected start and the
// factors are recomputed here rather than taken from the report.
inline std::vector<BoundCheck> verify_trace_bounds(const DenseMatrix& A, std::span<const double> b,
                                                   std::span<const double> x0, const SolveReport& report,
                                                   std::optional<double> rho_rrk_value = std::nullopt) {
  if (!is_reshuffling_kaczmarz(report.config.variant))
    throw UsageError("trace bounds apply to rrk, sok and ik runs only");
  if (report.epochs_run > 0 && report.traces.size() != report.epochs_run)
    throw UsageError("report carries no per-epoch trace; solve with record_trace set");

  const Vector target = projected_start(A, b, x0);
  const double initial = distance(x0, target);
  const ContractionEvaluator eval(A);

  std::vector<BoundCheck> checks;
  checks.reserve(report.traces.size());
  double before = initial;
  for (const EpochTrace& t : report.traces) {
    if (!t.is_permutation || t.row_order.size() != A.rows())
      throw UsageError("trace epoch " + std::to_string(t.epoch) + " does not hold a permutation");
    BoundCheck c;
    c.epoch = t.epoch;
    c.error_before = before;
    c.error_after = t.error_to_projected_start;
    c.factor = eval(Permutation(t.row_order));
    c.step_bound = c.factor * before;
    c.step_ok = c.error_after <= c.step_bound + bound_slack;
    if (rho_rrk_value) {
      c.envelope_bound = std::pow(*rho_rrk_value, static_cast<double>(t.epoch)) * initial;
      c.envelope_ok = c.error_after <= *c.envelope_bound + bound_slack;
    }
    checks.push_back(c);
    before = c.error_after;
  }
  return checks;
}

}  // namespace kaczlab
