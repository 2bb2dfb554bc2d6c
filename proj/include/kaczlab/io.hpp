#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kaczlab/errors.hpp"
#include "kaczlab/linalg.hpp"
#include "kaczlab/permutation.hpp"

namespace kaczlab {

// 17 significant digits: reads back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Matrix Market

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace detail

// Parses a real Matrix Market stream in coordinate or array layout, general or
// symmetric. Sparse input is expanded to dense, symmetric input is mirrored,
// and duplicate coordinate entries are summed.
inline DenseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line))
    throw ParseError(1, "empty input, expected a %%MatrixMarket banner");
  ++line_no;
  std::istringstream banner(line);
  std::string tag, object, layout, field, symmetry;
  banner >> tag >> object >> layout >> field >> symmetry;
  if (tag != "%%MatrixMarket")
    throw ParseError(line_no, "missing %%MatrixMarket banner");
  object = detail::lowercase(object);
  layout = detail::lowercase(layout);
  field = detail::lowercase(field);
  symmetry = detail::lowercase(symmetry);
  if (object != "matrix")
    throw ParseError(line_no, "unsupported object '" + object + "'");
  if (layout != "coordinate" && layout != "array")
    throw ParseError(line_no, "unsupported layout '" + layout + "'");
  if (field != "real")
    throw ParseError(line_no, "unsupported field '" + field + "', only real is accepted");
  if (symmetry != "general" && symmetry != "symmetric")
    throw ParseError(line_no, "unsupported symmetry '" + symmetry + "'");
  const bool coordinate = layout == "coordinate";
  const bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] == '%')
        continue;
      if (detail::is_blank(line))
        continue;
      return true;
    }
    return false;
  };

  if (!next_data_line())
    throw ParseError(line_no, "missing size line");
  std::istringstream size_line(line);
  long long rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols) || (coordinate && !(size_line >> entries)))
    throw ParseError(line_no, "malformed size line");
  if (rows < 1 || cols < 1 || entries < 0)
    throw ParseError(line_no, "matrix dimensions must be positive");
  if (symmetric && rows != cols)
    throw ParseError(line_no, "symmetric matrix must be square");

  const auto m = static_cast<std::size_t>(rows);
  const auto n = static_cast<std::size_t>(cols);
  DenseMatrix A(m, n);

  if (coordinate) {
    for (long long k = 0; k < entries; ++k) {
      if (!next_data_line())
        throw ParseError(line_no, "expected " + std::to_string(entries) + " entries, found " + std::to_string(k));
      std::istringstream ss(line);
      long long i = 0, j = 0;
      double v = 0.0;
      if (!(ss >> i >> j >> v))
        throw ParseError(line_no, "malformed coordinate entry");
      if (i < 1 || j < 1 || i > rows || j > cols)
        throw ParseError(line_no, "entry index out of range");
      if (symmetric && j > i)
        throw ParseError(line_no, "symmetric storage must hold the lower triangle");
      const auto r = static_cast<std::size_t>(i - 1);
      const auto c = static_cast<std::size_t>(j - 1);
      A(r, c) += v;
      if (symmetric && r != c)
        A(c, r) += v;
    }
  } else {
    // Column-major; symmetric arrays store the lower triangle only.
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t r = symmetric ? c : 0; r < m; ++r) {
        if (!next_data_line())
          throw ParseError(line_no, "array data ends early");
        std::istringstream ss(line);
        double v = 0.0;
        if (!(ss >> v))
          throw ParseError(line_no, "malformed array entry");
        A(r, c) = v;
        if (symmetric)
          A(c, r) = v;
      }
    }
  }
  if (next_data_line())
    throw ParseError(line_no, "unexpected trailing data");
  return A;
}

inline DenseMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError(0, "cannot open matrix file '" + path.string() + "'");
  return read_matrix_market(in);
}

// A column vector stored as an m x 1 (or 1 x n) Matrix Market matrix.
inline Vector read_vector_market(const std::filesystem::path& path) {
  const DenseMatrix M = read_matrix_market(path);
  if (M.cols() != 1 && M.rows() != 1)
    throw ParseError(0, "vector file must hold a single row or column");
  return Vector(M.data().begin(), M.data().end());
}

inline void write_matrix_market(std::ostream& out, const DenseMatrix& A) {
  out << "%%MatrixMarket matrix array real general\n";
  out << A.rows() << ' ' << A.cols() << '\n';
  for (std::size_t c = 0; c < A.cols(); ++c)
    for (std::size_t r = 0; r < A.rows(); ++r)
      out << format_double(A(r, c)) << '\n';
}

inline void write_matrix_market(const std::filesystem::path& path, const DenseMatrix& A) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  write_matrix_market(out, A);
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

inline void write_vector_market(const std::filesystem::path& path, std::span<const double> v) {
  write_matrix_market(path, DenseMatrix(v.size(), 1, Vector(v.begin(), v.end())));
}

// ---------------------------------------------------------------------------
// Problem instances

enum class Provenance { matrix_market, synthetic };

struct GeneratorInfo {
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;
};

struct ProblemInstance {
  DenseMatrix A;
  Vector b;
  std::optional<Vector> known_solution;
  Provenance provenance = Provenance::synthetic;
  std::optional<GeneratorInfo> generator;
};

// A = L R with L (m x rank) and R (rank x n) standard normal, x* standard
// normal, b = A x*. Draw order: L row-major, then R row-major, then x*.
inline ProblemInstance generate_synthetic(std::size_t m, std::size_t n, std::size_t rank, std::uint64_t seed) {
  if (m < 1 || n < 1)
    throw DomainError("instance dimensions must be positive");
  if (rank < 1 || rank > std::min(m, n))
    throw DomainError("rank must lie in [1, min(m, n)]");
  RngState rng(seed);
  DenseMatrix L(m, rank), R(rank, n);
  for (double& v : L.data())
    v = rng.normal();
  for (double& v : R.data())
    v = rng.normal();
  ProblemInstance inst;
  inst.A = multiply(L, R);
  Vector x(n);
  for (double& v : x)
    v = rng.normal();
  inst.b = multiply(inst.A, x);
  inst.known_solution = std::move(x);
  inst.provenance = Provenance::synthetic;
  inst.generator = GeneratorInfo{seed, m, n, rank};
  return inst;
}

// Matrix from a file with b = A x*, x* standard normal from `seed`.
inline ProblemInstance instance_from_matrix(DenseMatrix A, std::uint64_t seed) {
  RngState rng(seed);
  Vector x(A.cols());
  for (double& v : x)
    v = rng.normal();
  ProblemInstance inst;
  inst.b = multiply(A, x);
  inst.A = std::move(A);
  inst.known_solution = std::move(x);
  inst.provenance = Provenance::matrix_market;
  return inst;
}

// ---------------------------------------------------------------------------
// Experiment records

struct ExperimentRecord {
  std::string method;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> rse;       // rse[k-1] is the value after epoch k
  double wall_time_seconds = 0;  // informational, never written to files
  std::vector<double> bound_ik;  // rho_IK^k, empty when not computed
  std::vector<double> bound_rk;  // rho_RK^{mk}, empty when not computed
};

enum class RecordFormat { csv, json };

inline std::optional<RecordFormat> parse_record_format(std::string_view s) {
  if (s == "csv")
    return RecordFormat::csv;
  if (s == "json")
    return RecordFormat::json;
  return std::nullopt;
}

namespace detail {

inline std::optional<double> at_epoch(const std::vector<double>& values, std::size_t k) {
  if (k < values.size())
    return values[k];
  return std::nullopt;
}

}  // namespace detail

inline void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "method,trial,seed,epoch,rse,bound_ik,bound_rk\n";
  for (const auto& r : records)
    for (std::size_t k = 0; k < r.rse.size(); ++k) {
      out << r.method << ',' << r.trial << ',' << r.seed << ',' << (k + 1) << ',' << format_double(r.rse[k]) << ',';
      if (auto v = detail::at_epoch(r.bound_ik, k))
        out << format_double(*v);
      out << ',';
      if (auto v = detail::at_epoch(r.bound_rk, k))
        out << format_double(*v);
      out << '\n';
    }
}

// One JSON object per CSV row, same field names; absent bounds are null.
inline nlohmann::json records_to_json(const std::vector<ExperimentRecord>& records) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : records)
    for (std::size_t k = 0; k < r.rse.size(); ++k) {
      nlohmann::json row;
      row["method"] = r.method;
      row["trial"] = r.trial;
      row["seed"] = r.seed;
      row["epoch"] = k + 1;
      row["rse"] = r.rse[k];
      auto ik = detail::at_epoch(r.bound_ik, k);
      auto rk = detail::at_epoch(r.bound_rk, k);
      row["bound_ik"] = ik ? nlohmann::json(*ik) : nlohmann::json(nullptr);
      row["bound_rk"] = rk ? nlohmann::json(*rk) : nlohmann::json(nullptr);
      rows.push_back(std::move(row));
    }
  return rows;
}

inline void write_records(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path,
                          RecordFormat format) {
  if (records.empty())
    throw UsageError("no experiment records to write");
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  if (format == RecordFormat::csv)
    write_records_csv(out, records);
  else
    out << records_to_json(records).dump(1) << '\n';
  out.flush();
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

// Regroups JSON rows into records keyed by (method, trial), in file order.
inline std::vector<ExperimentRecord> records_from_json(const nlohmann::json& rows) {
  if (!rows.is_array())
    throw ParseError(0, "record file must hold a JSON array");
  std::vector<ExperimentRecord> out;
  std::map<std::pair<std::string, std::size_t>, std::size_t> index;
  for (const auto& row : rows) {
    try {
      const auto key = std::make_pair(row.at("method").get<std::string>(), row.at("trial").get<std::size_t>());
      auto [it, inserted] = index.try_emplace(key, out.size());
      if (inserted) {
        ExperimentRecord r;
        r.method = key.first;
        r.trial = key.second;
        r.seed = row.at("seed").get<std::uint64_t>();
        out.push_back(std::move(r));
      }
      ExperimentRecord& r = out[it->second];
      if (row.at("epoch").get<std::size_t>() != r.rse.size() + 1)
        throw ParseError(0, "epochs out of order for " + key.first + " trial " + std::to_string(key.second));
      r.rse.push_back(row.at("rse").get<double>());
      if (!row.at("bound_ik").is_null())
        r.bound_ik.push_back(row.at("bound_ik").get<double>());
      if (!row.at("bound_rk").is_null())
        r.bound_rk.push_back(row.at("bound_rk").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(0, std::string("bad record row: ") + e.what());
    }
  }
  return out;
}

inline std::vector<ExperimentRecord> read_records_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot read '" + path.string() + "'");
  nlohmann::json rows;
  try {
    in >> rows;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("invalid JSON: ") + e.what());
  }
  return records_from_json(rows);
}

}  // namespace kaczlab
