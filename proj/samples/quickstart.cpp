// Solve a small consistent system with random reshuffling and check every
// epoch against its contraction factor.
#include <cstdio>

#include "kaczlab/kaczlab.hpp"

int main() {
  using namespace kaczlab;

  const DenseMatrix A{{6, 4}, {10, 4}, {5, 8}};
  const Vector x_true{1.0, -2.0};
  const Vector b = multiply(A, x_true);
  const Vector x0(A.cols(), 0.0);

  SolverConfig cfg;
  cfg.variant = Variant::rrk;
  cfg.seed = 42;
  cfg.max_epochs = 200;
  const SolveReport report = solve(A, b, x0, cfg);

  const RateTable rates = rho_rrk(A);
  const auto checks = verify_trace_bounds(A, b, x0, report, rates.rho_rrk);

  std::printf("epochs=%zu final_rse=%.3e rho_rrk=%.4f argmax=%s bounds=%s\n", report.epochs_run, report.final_rse,
              rates.rho_rrk, rates.argmax.to_string().c_str(), all_passed(checks) ? "ok" : "VIOLATED");
  return all_passed(checks) ? 0 : 1;
}
