#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaczlab/errors.hpp"
#include "kaczlab/linalg.hpp"
#include "kaczlab/permutation.hpp"

namespace kaczlab {

// Row-selection regime of an epoch.
//   rrk          fresh random permutation every epoch
//   sok          one random permutation drawn at start, reused
//   ik           identity order every epoch
//   rk           m with-replacement draws, probability ~ ||a_i||^2
//   rr_sgd_const reshuffled SGD with a constant step on f_i = (<a_i,x> - b_i)^2 / 2
enum class Variant { rrk, sok, ik, rk, rr_sgd_const };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::rrk: return "rrk";
    case Variant::sok: return "sok";
    case Variant::ik: return "ik";
    case Variant::rk: return "rk";
    case Variant::rr_sgd_const: return "rrsgd";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : {Variant::rrk, Variant::sok, Variant::ik, Variant::rk, Variant::rr_sgd_const})
    if (to_string(v) == name)
      return v;
  return std::nullopt;
}

inline bool is_kaczmarz(Variant v) noexcept { return v != Variant::rr_sgd_const; }

// Variants whose epochs are permutations with the exact projection step, the
// setting in which the per-epoch contraction bound applies.
inline bool is_reshuffling_kaczmarz(Variant v) noexcept {
  return v == Variant::rrk || v == Variant::sok || v == Variant::ik;
}

struct SolverConfig {
  Variant variant = Variant::rrk;
  std::size_t max_epochs = 1000;
  double rse_tolerance = 1e-12;
  double residual_tolerance = 1e-10;  // relative to ||b||
  std::uint64_t seed = 0;
  double step = 0.0;  // constant step gamma, rr_sgd_const only
  bool record_trace = true;

  void validate() const {
    if (max_epochs < 1)
      throw InputError("max_epochs must be at least 1");
    if (!(rse_tolerance > 0.0) || !(residual_tolerance > 0.0))
      throw InputError("tolerances must be positive");
    if (variant == Variant::rr_sgd_const && !(step > 0.0 && std::isfinite(step)))
      throw InputError("rr_sgd_const requires a positive step");
  }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct EpochTrace {
  std::size_t epoch = 0;                // 1-based: the state after this many epochs
  std::vector<std::size_t> row_order;   // 0-based rows visited in this epoch
  bool is_permutation = true;           // false for rk draws
  double error_to_projected_start = 0.0;
  double rse = 0.0;
  double residual_norm = 0.0;
  double contraction_observed = 0.0;    // error ratio against the previous epoch

  friend bool operator==(const EpochTrace&, const EpochTrace&) = default;
};

enum class StopReason { rse, residual, max_epochs, stagnation };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::rse: return "rse";
    case StopReason::residual: return "residual";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::stagnation: return "stagnation";
  }
  return "?";
}

struct SolveReport {
  Vector solution;
  std::size_t epochs_run = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::max_epochs;
  std::vector<EpochTrace> traces;
  SolverConfig config;

  Vector projected_start;   // A^+(b - A x0) + x0, the limit of the Kaczmarz iterates
  double initial_error = 0.0;
  double final_rse = 0.0;
  double final_residual = 0.0;
  bool consistent = true;
  std::vector<std::string> warnings;

  friend bool operator==(const SolveReport&, const SolveReport&) = default;
};

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

// x <- x - step * (<a,x> - rhs) * a. The Kaczmarz projection is this with
// step = 1 / ||a||^2, so both paths share one floating-point sequence.
inline void gradient_step(std::span<double> x, std::span<const double> a, double rhs,
                          double step) noexcept {
  const double coeff = step * (dot(a, x) - rhs);
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] -= coeff * a[j];
}

inline void check_system(const DenseMatrix& A, std::span<const double> b, std::span<const double> x) {
  if (A.empty())
    throw InputError("empty coefficient matrix");
  if (b.size() != A.rows())
    throw InputError("right-hand side length does not match the row count");
  if (x.size() != A.cols())
    throw InputError("iterate length does not match the column count");
}

inline Vector squared_row_norms(const DenseMatrix& A) {
  Vector s(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    s[i] = dot(A.row(i), A.row(i));
  return s;
}

inline void reject_zero_rows(std::span<const double> squared_norms) {
  for (std::size_t i = 0; i < squared_norms.size(); ++i)
    if (!(squared_norms[i] > 0.0))
      throw ZeroRowError(i);
}

inline void check_permutation(const DenseMatrix& A, const Permutation& order) {
  if (order.size() != A.rows())
    throw InputError("permutation size does not match the row count");
}

}  // namespace detail

// Orthogonal projection of x onto the hyperplane <a, x> = rhs.
inline Vector project_row(std::span<const double> x, std::span<const double> a, double rhs,
                          std::size_t row = ZeroRowError::unknown_row) {
  if (x.size() != a.size())
    throw InputError("row and iterate lengths differ");
  const double a_sq = dot(a, a);
  if (!(a_sq > 0.0))
    throw ZeroRowError(row);
  Vector out(x.begin(), x.end());
  detail::gradient_step(out, a, rhs, 1.0 / a_sq);
  return out;
}

// One Kaczmarz sweep over the rows of A in the given order.
inline Vector run_epoch(std::span<const double> x, const DenseMatrix& A, std::span<const double> b,
                        const Permutation& order) {
  detail::check_system(A, b, x);
  detail::check_permutation(A, order);
  Vector out(x.begin(), x.end());
  for (std::size_t i : order) {
    const auto a = A.row(i);
    const double a_sq = dot(a, a);
    if (!(a_sq > 0.0))
      throw ZeroRowError(i);
    detail::gradient_step(out, a, b[i], 1.0 / a_sq);
  }
  return out;
}

// Reshuffled SGD epoch with a per-row step policy `step(row) -> double`.
template <class StepPolicy>
  requires std::invocable<StepPolicy, std::size_t>
Vector rr_sgd_epoch(std::span<const double> x, const DenseMatrix& A, std::span<const double> b,
                    const Permutation& order, StepPolicy&& step) {
  detail::check_system(A, b, x);
  detail::check_permutation(A, order);
  Vector out(x.begin(), x.end());
  for (std::size_t i : order)
    detail::gradient_step(out, A.row(i), b[i], step(i));
  return out;
}

// Reshuffled SGD epoch with constant step gamma.
inline Vector rr_sgd_epoch(std::span<const double> x, const DenseMatrix& A, std::span<const double> b,
                           const Permutation& order, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw DomainError("step size must be positive");
  return rr_sgd_epoch(x, A, b, order, [gamma](std::size_t) { return gamma; });
}

// ---------------------------------------------------------------------------
// Driver

// Runs the configured variant from x0 until the iterate's relative solution
// error against the projected start drops to rse_tolerance, the residual drops
// to residual_tolerance * ||b||, or max_epochs have run.
//
// The projected start A^+(b - A x0) + x0 is computed once from an SVD of A.
// An inconsistent b is not an error here: the report carries a warning and
// `consistent = false`, and the run stops early if the iterates stop moving
// while the residual stays above tolerance.
inline SolveReport solve(const DenseMatrix& A, std::span<const double> b, std::span<const double> x0,
                         const SolverConfig& config) {
  config.validate();
  detail::check_system(A, b, x0);
  if (!A.all_finite())
    throw InputError("coefficient matrix contains non-finite entries");

  const std::size_t m = A.rows();
  const Vector row_sq = detail::squared_row_norms(A);
  if (is_kaczmarz(config.variant))
    detail::reject_zero_rows(row_sq);

  SolveReport report;
  report.config = config;

  const DenseMatrix pinv = pseudoinverse(A);
  {
    const double b_norm = norm2(b);
    const Vector fitted = multiply(A, multiply(pinv, b));
    const double gap = distance(fitted, b);
    if (gap > 1e-8 * (1.0 + b_norm)) {
      report.consistent = false;
      report.warnings.push_back("InconsistencyWarning: ||A A^+ b - b|| = " + std::to_string(gap) +
                                "; convergence to a solution is not expected");
    }
  }
  report.projected_start = add(multiply(pinv, subtract(b, multiply(A, x0))), x0);

  const double b_norm = norm2(b);
  const double residual_target = config.residual_tolerance * b_norm;
  const double initial_sq = [&] {
    const double e = distance(x0, report.projected_start);
    return e * e;
  }();
  report.initial_error = std::sqrt(initial_sq);

  auto rse_of = [&](double error) { return initial_sq > 0.0 ? (error * error) / initial_sq : 0.0; };

  Vector x(x0.begin(), x0.end());
  report.final_residual = distance(multiply(A, x), b);
  report.final_rse = initial_sq > 0.0 ? 1.0 : 0.0;

  if (initial_sq == 0.0 && report.consistent) {
    report.converged = true;
    report.stop_reason = StopReason::rse;
  } else if (report.final_residual <= residual_target) {
    report.converged = true;
    report.stop_reason = StopReason::residual;
  }
  if (report.converged) {
    report.solution = std::move(x);
    return report;
  }

  RngState rng(config.seed);
  std::optional<Permutation> fixed_order;
  if (config.variant == Variant::sok)
    fixed_order = random_permutation(m, rng);
  else if (config.variant == Variant::ik)
    fixed_order = identity_permutation(m);
  std::optional<WeightedSampler> sampler;
  if (config.variant == Variant::rk)
    sampler.emplace(row_sq);
  Vector inverse_sq(m);
  for (std::size_t i = 0; i < m; ++i)
    inverse_sq[i] = row_sq[i] > 0.0 ? 1.0 / row_sq[i] : 0.0;

  double previous_error = report.initial_error;
  report.stop_reason = StopReason::max_epochs;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Vector before = config.record_trace || !report.consistent ? x : Vector{};
    std::vector<std::size_t> visited;
    bool is_permutation = true;

    switch (config.variant) {
      case Variant::rrk:
      case Variant::sok:
      case Variant::ik: {
        const Permutation order =
            config.variant == Variant::rrk ? random_permutation(m, rng) : *fixed_order;
        for (std::size_t i : order)
          detail::gradient_step(x, A.row(i), b[i], inverse_sq[i]);
        if (config.record_trace)
          visited.assign(order.begin(), order.end());
        break;
      }
      case Variant::rk: {
        is_permutation = false;
        if (config.record_trace)
          visited.reserve(m);
        for (std::size_t s = 0; s < m; ++s) {
          const std::size_t i = (*sampler)(rng);
          detail::gradient_step(x, A.row(i), b[i], inverse_sq[i]);
          if (config.record_trace)
            visited.push_back(i);
        }
        break;
      }
      case Variant::rr_sgd_const: {
        const Permutation order = random_permutation(m, rng);
        for (std::size_t i : order)
          detail::gradient_step(x, A.row(i), b[i], config.step);
        if (config.record_trace)
          visited.assign(order.begin(), order.end());
        break;
      }
    }

    const double error = distance(x, report.projected_start);
    const double residual = distance(multiply(A, x), b);
    const double rse_now = rse_of(error);
    report.epochs_run = epoch;
    report.final_rse = rse_now;
    report.final_residual = residual;

    if (config.record_trace) {
      EpochTrace t;
      t.epoch = epoch;
      t.row_order = std::move(visited);
      t.is_permutation = is_permutation;
      t.error_to_projected_start = error;
      t.rse = rse_now;
      t.residual_norm = residual;
      t.contraction_observed = previous_error > 0.0 ? error / previous_error : 0.0;
      report.traces.push_back(std::move(t));
    }
    previous_error = error;

    if (report.consistent && rse_now <= config.rse_tolerance) {
      report.converged = true;
      report.stop_reason = StopReason::rse;
      break;
    }
    if (residual <= residual_target) {
      report.converged = true;
      report.stop_reason = StopReason::residual;
      break;
    }
    if (!before.empty()) {
      const double moved = distance(x, before);
      if (moved <= 1e-14 * std::max(1.0, norm2(x))) {
        report.warnings.push_back(
            std::string(report.consistent ? "StagnationWarning" : "InconsistencyWarning") +
            ": residual " + std::to_string(residual) + " stagnated above tolerance at epoch " +
            std::to_string(epoch));
        report.stop_reason = StopReason::stagnation;
        break;
      }
    }
  }

  report.solution = std::move(x);
  return report;
}

}  // namespace kaczlab
