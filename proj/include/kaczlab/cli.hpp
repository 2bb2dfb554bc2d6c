#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kaczlab/analysis.hpp"
#include "kaczlab/errors.hpp"
#include "kaczlab/io.hpp"
#include "kaczlab/linalg.hpp"
#include "kaczlab/permutation.hpp"
#include "kaczlab/solver.hpp"

namespace kaczlab::cli {

enum ExitCode : int { ok = 0, usage_or_io = 1, numerical = 2 };

struct GenSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;  // 0 -> min(rows, cols)
};

// Parses "m=50,n=30,rank=15"; rank is optional.
inline GenSpec parse_gen_spec(const std::string& text) {
  GenSpec g;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ParseError(0, "--gen expects key=value pairs, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    std::size_t value = 0;
    try {
      std::size_t used = 0;
      const std::string digits = item.substr(eq + 1);
      if (digits.empty() || digits[0] == '-')
        throw std::invalid_argument("negative");
      value = std::stoull(digits, &used);
      if (used != digits.size())
        throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(0, "--gen value for '" + key + "' is not a nonnegative integer");
    }
    if (key == "m")
      g.rows = value;
    else if (key == "n")
      g.cols = value;
    else if (key == "rank")
      g.rank = value;
    else
      throw ParseError(0, "--gen: unknown key '" + key + "'");
  }
  if (g.rows == 0 || g.cols == 0)
    throw ParseError(0, "--gen needs positive m and n");
  if (g.rank == 0)
    g.rank = std::min(g.rows, g.cols);
  else if (g.rank > std::min(g.rows, g.cols))
    throw ParseError(0, "--gen: rank must not exceed min(m, n)");
  return g;
}

struct Options {
  std::string matrix;
  std::string gen;
  std::string rhs;
  std::string variant = "rrk";
  std::uint64_t seed = 0;
  std::size_t epochs = 1000;
  double rse_tol = 1e-12;
  double res_tol = 1e-10;
  std::size_t trials = 20;
  double gamma = 0.0;
  std::size_t sample = 0;
  std::string out;
  std::string format;
};

inline ProblemInstance load_instance(const Options& o) {
  if (!o.gen.empty()) {
    const GenSpec g = parse_gen_spec(o.gen);
    return generate_synthetic(g.rows, g.cols, g.rank, o.seed);
  }
  DenseMatrix A = read_matrix_market(std::filesystem::path(o.matrix));
  if (o.rhs.empty())
    return instance_from_matrix(std::move(A), o.seed);
  ProblemInstance inst;
  inst.b = read_vector_market(o.rhs);
  if (inst.b.size() != A.rows())
    throw ParseError(0, "right-hand side length does not match the matrix row count");
  inst.A = std::move(A);
  inst.provenance = Provenance::matrix_market;
  return inst;
}

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

inline nlohmann::json one_based(std::span<const std::size_t> order) {
  nlohmann::json a = nlohmann::json::array();
  for (std::size_t i : order)
    a.push_back(i + 1);
  return a;
}

inline nlohmann::json config_json(const SolverConfig& c) {
  return {{"variant", std::string(to_string(c.variant))},
          {"max_epochs", c.max_epochs},
          {"rse_tolerance", c.rse_tolerance},
          {"residual_tolerance", c.residual_tolerance},
          {"seed", c.seed},
          {"step", c.step}};
}

inline nlohmann::json report_json(const SolveReport& r) {
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : r.traces)
    traces.push_back({{"epoch", t.epoch},
                      {"rows", one_based(t.row_order)},
                      {"is_permutation", t.is_permutation},
                      {"error_to_projected_start", t.error_to_projected_start},
                      {"rse", t.rse},
                      {"residual_norm", t.residual_norm},
                      {"contraction_observed", t.contraction_observed}});
  return {{"config", config_json(r.config)},
          {"epochs_run", r.epochs_run},
          {"converged", r.converged},
          {"stop_reason", std::string(to_string(r.stop_reason))},
          {"final_rse", r.final_rse},
          {"final_residual", r.final_residual},
          {"initial_error", r.initial_error},
          {"consistent", r.consistent},
          {"warnings", r.warnings},
          {"solution", r.solution},
          {"traces", traces}};
}

inline void write_report_csv(std::ostream& out, const SolveReport& r) {
  out << "# variant=" << to_string(r.config.variant) << " seed=" << r.config.seed << '\n';
  out << "epoch,error_to_projected_start,rse,residual_norm,contraction_observed\n";
  for (const auto& t : r.traces)
    out << t.epoch << ',' << fmt(t.error_to_projected_start) << ',' << fmt(t.rse) << ',' << fmt(t.residual_norm)
        << ',' << fmt(t.contraction_observed) << '\n';
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  return out;
}

inline Vector zeros(std::size_t n) { return Vector(n, 0.0); }

// Step satisfying gamma <= 1 / (sqrt(2) m ||A||_2^2).
inline double default_sgd_step(const DenseMatrix& A) {
  const double s = spectral_norm(A);
  return 1.0 / (std::sqrt(2.0) * static_cast<double>(A.rows()) * s * s);
}

}  // namespace detail

inline int cmd_solve(const Options& o, std::ostream& out, std::ostream& err) {
  const ProblemInstance inst = load_instance(o);
  SolverConfig cfg;
  cfg.variant = *parse_variant(o.variant);
  cfg.max_epochs = o.epochs;
  cfg.rse_tolerance = o.rse_tol;
  cfg.residual_tolerance = o.res_tol;
  cfg.seed = o.seed;
  cfg.step = o.gamma;
  if (cfg.variant == Variant::rr_sgd_const && cfg.step == 0.0)
    cfg.step = detail::default_sgd_step(inst.A);

  const SolveReport report = solve(inst.A, inst.b, detail::zeros(inst.A.cols()), cfg);

  out << "variant=" << to_string(cfg.variant) << " seed=" << cfg.seed << " epochs=" << report.epochs_run
      << " converged=" << (report.converged ? "true" : "false") << " stop=" << to_string(report.stop_reason)
      << " final_rse=" << detail::fmt(report.final_rse) << " residual=" << detail::fmt(report.final_residual)
      << '\n';
  for (const auto& w : report.warnings)
    err << w << '\n';

  if (!o.out.empty()) {
    auto f = detail::open_output(o.out);
    if (o.format == "csv")
      detail::write_report_csv(f, report);
    else
      f << detail::report_json(report).dump(1) << '\n';
    if (!f)
      throw IoError("write failed for '" + o.out + "'");
  }
  return report.consistent ? ok : numerical;
}

inline int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err, bool full_dump) {
  const ProblemInstance inst = load_instance(o);
  const DenseMatrix& A = inst.A;
  const std::size_t m = A.rows();

  nlohmann::json doc;
  if (!full_dump) {
    const SpectralSummary s = rho_rk(A);
    const double ik = rho_ik(A);
    out << "rows=" << m << " cols=" << A.cols() << " rank=" << s.numerical_rank << '\n';
    out << "sigma_min=" << detail::fmt(s.sigma_min) << '\n';
    out << "spectral_norm=" << detail::fmt(s.spectral_norm_A) << '\n';
    out << "frobenius_norm=" << detail::fmt(s.frobenius_norm_A) << '\n';
    out << "rho_rk=" << detail::fmt(s.rho_rk) << '\n';
    out << "rho_rk^m=" << detail::fmt(s.rho_rk_per_epoch) << '\n';
    out << "rho_ik=" << detail::fmt(ik) << '\n';
    doc = {{"rows", m},
           {"cols", A.cols()},
           {"rank", s.numerical_rank},
           {"sigma_min", s.sigma_min},
           {"spectral_norm", s.spectral_norm_A},
           {"frobenius_norm", s.frobenius_norm_A},
           {"rho_rk", s.rho_rk},
           {"rho_rk_per_epoch", s.rho_rk_per_epoch},
           {"rho_ik", ik}};
  }

  if (o.sample > 0) {
    RngState rng(o.seed);
    const double lower = rho_rrk_sampled(A, o.sample, rng);
    out << "rho_rrk_sampled_lower_bound=" << detail::fmt(lower) << " (max over " << o.sample
        << " sampled permutations; a lower bound on rho_rrk)\n";
    doc["rho_rrk_sampled_lower_bound"] = lower;
    doc["samples"] = o.sample;
  }

  if (m > default_enumeration_limit) {
    if (o.sample == 0)
      throw CapacityError("m = " + std::to_string(m) + " exceeds the enumeration cap of " +
                          std::to_string(default_enumeration_limit) +
                          "; rerun with --sample N for a sampled lower bound on rho_rrk");
  } else {
    RngState rng(o.seed);
    const Permutation so = random_permutation(m, rng);  // the order sok would draw with this seed
    const RateTable table = rho_rrk(A, default_enumeration_limit, so);
    const auto rows = full_dump ? table.sorted_descending() : table.entries;
    out << "rho_rrk=" << detail::fmt(table.rho_rrk) << " argmax=" << table.argmax.to_string() << '\n';
    if (!full_dump)
      out << "rho_sok=" << detail::fmt(*table.rho_sok) << " shuffle=" << so.to_string() << '\n';
    out << "permutation,factor\n";
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : rows) {
      out << '"' << e.permutation.to_string() << "\"," << detail::fmt(e.factor) << '\n';
      entries.push_back({{"permutation", detail::one_based(e.permutation.order())}, {"factor", e.factor}});
    }
    doc["rho_rrk"] = table.rho_rrk;
    doc["argmax"] = detail::one_based(table.argmax.order());
    doc["rho_sok"] = *table.rho_sok;
    doc["sok_permutation"] = detail::one_based(so.order());
    doc["table"] = entries;

    if (full_dump && !o.out.empty() && o.format == "csv") {
      auto f = detail::open_output(o.out);
      f << "permutation,factor\n";
      for (const auto& e : rows)
        f << '"' << e.permutation.to_string() << "\"," << detail::fmt(e.factor) << '\n';
      return ok;
    }
  }

  if (!o.out.empty()) {
    auto f = detail::open_output(o.out);
    f << doc.dump(1) << '\n';
    if (!f)
      throw IoError("write failed for '" + o.out + "'");
  }
  (void)err;
  return ok;
}

// Runs {rrk, sok, ik, rk} x trials from x0 = 0 with per-trial seed
// base_seed + trial and records the RSE curve with the rho_IK^k and
// rho_RK^{mk} envelopes. Trials run concurrently; records are emitted in
// (method, trial) order.
inline std::vector<ExperimentRecord> run_bench(const ProblemInstance& inst, const Options& o) {
  const DenseMatrix& A = inst.A;
  const double ik = rho_ik(A);
  const double rk_epoch = rho_rk(A).rho_rk_per_epoch;
  const std::vector<Variant> methods{Variant::rrk, Variant::sok, Variant::ik, Variant::rk};

  struct Job {
    Variant method;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (Variant v : methods)
    for (std::size_t t = 0; t < o.trials; ++t)
      jobs.push_back({v, t});

  std::vector<ExperimentRecord> records(jobs.size());
  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    SolverConfig cfg;
    cfg.variant = job.method;
    cfg.max_epochs = o.epochs;
    cfg.rse_tolerance = o.rse_tol;
    cfg.residual_tolerance = o.res_tol;
    cfg.seed = o.seed + job.trial;
    const auto start = std::chrono::steady_clock::now();
    const SolveReport rep = solve(A, inst.b, detail::zeros(A.cols()), cfg);
    ExperimentRecord r;
    r.method = std::string(to_string(job.method));
    r.trial = job.trial;
    r.seed = cfg.seed;
    r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& t : rep.traces) {
      r.rse.push_back(t.rse);
      r.bound_ik.push_back(std::pow(ik, static_cast<double>(t.epoch)));
      r.bound_rk.push_back(std::pow(rk_epoch, static_cast<double>(t.epoch)));
    }
    records[j] = std::move(r);
  };

  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j)
      run_job(j);
  } else {
    std::vector<std::future<void>> pending;
    std::size_t next = 0;
    // Bounded fan-out: at most `workers` jobs in flight.
    while (next < jobs.size() || !pending.empty()) {
      while (next < jobs.size() && pending.size() < workers)
        pending.push_back(std::async(std::launch::async, run_job, next++));
      pending.front().get();
      pending.erase(pending.begin());
    }
  }
  return records;
}

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream&) {
  const ProblemInstance inst = load_instance(o);
  const auto records = run_bench(inst, o);
  write_records(records, o.out, *parse_record_format(o.format.empty() ? "csv" : o.format));

  std::map<std::string, std::vector<double>> finals;
  for (const auto& r : records)
    finals[r.method].push_back(r.rse.empty() ? 0.0 : r.rse.back());
  for (auto& [method, v] : finals) {
    std::sort(v.begin(), v.end());
    out << "method=" << method << " trials=" << v.size() << " median_final_rse=" << detail::fmt(v[v.size() / 2])
        << '\n';
  }
  out << "wrote " << o.out << '\n';
  return ok;
}

inline int cmd_gen(const Options& o, std::ostream& out, std::ostream&) {
  if (o.gen.empty())
    throw UsageError("gen requires --gen m=..,n=..[,rank=..]");
  const ProblemInstance inst = load_instance(o);
  const std::string prefix = o.out.empty() ? "instance" : o.out;
  write_matrix_market(prefix + ".A.mtx", inst.A);
  write_vector_market(prefix + ".b.mtx", inst.b);
  write_vector_market(prefix + ".x.mtx", *inst.known_solution);
  out << "wrote " << prefix << ".A.mtx " << prefix << ".b.mtx " << prefix << ".x.mtx\n";
  return ok;
}

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random-reshuffling Kaczmarz solvers and rate analysis", "kaczlab"};
  app.require_subcommand(1);
  Options o;

  auto add_instance = [&](CLI::App* sub) {
    auto* mat = sub->add_option("--matrix", o.matrix, "Matrix Market file holding A");
    auto* gen = sub->add_option("--gen", o.gen, "synthetic instance, e.g. m=50,n=30,rank=15");
    mat->excludes(gen);
    sub->add_option("--rhs", o.rhs, "Matrix Market vector b (default: b = A x*, x* ~ N(0, I))")->needs(mat);
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "64-bit seed")->envname("KACZLAB_SEED");
  };
  auto add_tolerances = [&](CLI::App* sub) {
    sub->add_option("--epochs", o.epochs, "epoch cap")->check(CLI::PositiveNumber);
    sub->add_option("--rse-tol", o.rse_tol, "stop when RSE falls to this")->check(CLI::PositiveNumber);
    sub->add_option("--res-tol", o.res_tol, "stop when ||Ax-b|| <= tol * ||b||")->check(CLI::PositiveNumber);
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "output path");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  };

  auto* solve_cmd = app.add_subcommand("solve", "run one solver variant and report the trace");
  add_instance(solve_cmd);
  add_seed(solve_cmd);
  add_tolerances(solve_cmd);
  add_output(solve_cmd);
  solve_cmd->add_option("--variant", o.variant, "rrk, sok, ik, rk or rrsgd")
      ->check(CLI::IsMember({"rrk", "sok", "ik", "rk", "rrsgd"}));
  solve_cmd->add_option("--gamma", o.gamma, "constant step for rrsgd")->check(CLI::PositiveNumber);

  auto* analyze_cmd = app.add_subcommand("analyze", "spectral summary and contraction factors");
  add_instance(analyze_cmd);
  add_seed(analyze_cmd);
  add_output(analyze_cmd);
  analyze_cmd->add_option("--sample", o.sample, "sampled lower bound on rho_rrk from N permutations")
      ->check(CLI::PositiveNumber);

  auto* enumerate_cmd = app.add_subcommand("enumerate", "every permutation's contraction factor, descending");
  add_instance(enumerate_cmd);
  add_seed(enumerate_cmd);
  add_output(enumerate_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "rrk/sok/ik/rk trials with RSE curves and bound envelopes");
  add_instance(bench_cmd);
  add_seed(bench_cmd);
  add_tolerances(bench_cmd);
  add_output(bench_cmd);
  bench_cmd->add_option("--trials", o.trials, "independent trials per method")->check(CLI::PositiveNumber);

  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic instance as Matrix Market files");
  add_instance(gen_cmd);
  add_seed(gen_cmd);
  gen_cmd->add_option("--out", o.out, "output prefix");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("kaczlab");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage)
    argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage_or_io;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name != "gen" && o.matrix.empty() && o.gen.empty())
      throw UsageError("an instance is required: --matrix <path> or --gen m=..,n=..,rank=..");
    if (name == "solve")
      return cmd_solve(o, out, err);
    if (name == "analyze")
      return cmd_analyze(o, out, err, false);
    if (name == "enumerate")
      return cmd_analyze(o, out, err, true);
    if (name == "bench") {
      if (o.out.empty())
        throw UsageError("bench requires --out <path>");
      return cmd_bench(o, out, err);
    }
    return cmd_gen(o, out, err);
  } catch (const ZeroRowError& e) {
    err << "ZeroRowError: " << e.what() << '\n';
    return numerical;
  } catch (const ConsistencyError& e) {
    err << "ConsistencyError: " << e.what() << '\n';
    return numerical;
  } catch (const DomainError& e) {
    err << "DomainError: " << e.what() << '\n';
    return numerical;
  } catch (const CapacityError& e) {
    err << "CapacityError: " << e.what() << '\n';
    return usage_or_io;
  } catch (const ParseError& e) {
    err << "ParseError: " << e.what() << '\n';
    return usage_or_io;
  } catch (const IoError& e) {
    err << "IoError: " << e.what() << '\n';
    return usage_or_io;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return usage_or_io;
  }
}

}  // namespace kaczlab::cli
