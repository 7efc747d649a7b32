#include "renyi_ot/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace renyi_ot {

using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n'))
    --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
    out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

double number_or_throw(const std::string& s, const std::string& where) {
  double v = 0.0;
  if (!parse_number(s, v) || !std::isfinite(v))
    throw Error(ErrorCode::ParseError, where + ": '" + s + "' is not a finite number");
  return v;
}

// Reads non-blank lines.
std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) lines.push_back(line);
  return lines;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

Histogram normalize_column(std::vector<double> values, bool percent, const std::string& name,
                           const std::string& source, std::vector<std::string>& warnings) {
  for (double v : values)
    if (v < 0.0) throw Error(ErrorCode::NegativeMass, source + ": negative mass in column " + name);
  if (percent)
    for (double& v : values) v /= 100.0;
  double total = 0.0;
  for (double v : values) total += v;
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotalMass, source + ": column " + name + " is zero");
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << source << ": column " << name << " sums to " << format_double(total)
       << (percent ? " after percent conversion" : "") << "; renormalized";
    warnings.push_back(os.str());
  }
  return histogram_from_samples(values);
}

}  // namespace

// ---------------------------------------------------------------------------

MarginalData parse_marginals(std::istream& in, const std::string& source) {
  const std::vector<std::string> lines = read_lines(in);
  if (lines.empty()) throw Error(ErrorCode::ParseError, source + ": empty file");
  const std::vector<std::string> header = split_csv(lines[0]);
  auto column = [&](const char* name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorCode::ParseError, source + ": header lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ci = column("index"), cr = column("r"), cc = column("c");

  std::vector<double> r, c;
  double first_index = 0.0;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::vector<std::string> f = split_csv(lines[k]);
    const std::string where = source + ":" + std::to_string(k + 1);
    if (f.size() != header.size())
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(header.size()) +
                                             " fields, got " + std::to_string(f.size()));
    const double idx = number_or_throw(f[ci], where);
    if (k == 1) {
      if (idx != 0.0 && idx != 1.0)
        throw Error(ErrorCode::ParseError, where + ": indices must start at 0 or 1");
      first_index = idx;
    } else if (idx != first_index + static_cast<double>(k - 1)) {
      throw Error(ErrorCode::ParseError, where + ": rows are not in index order");
    }
    r.push_back(number_or_throw(f[cr], where));
    c.push_back(number_or_throw(f[cc], where));
  }
  if (r.empty()) throw Error(ErrorCode::ParseError, source + ": no data rows");

  const auto above = [](const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return x > 1.5; });
  };
  const bool percent = above(r) || above(c);
  std::vector<std::string> warnings;
  if (percent) warnings.push_back(source + ": values above 1.5, reading as percent");
  Histogram hr = normalize_column(std::move(r), percent, "r", source, warnings);
  Histogram hc = normalize_column(std::move(c), percent, "c", source, warnings);
  if (hr.size() != hc.size()) throw Error(ErrorCode::LengthMismatch, source + ": r and c differ");
  return MarginalData{std::move(hr), std::move(hc), std::move(warnings)};
}

MarginalData ingest_marginals(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_marginals(in, path);
}

SimilarityData parse_similarity(std::istream& in, const std::string& source) {
  const std::vector<std::string> lines = read_lines(in);
  if (lines.size() < 2) throw Error(ErrorCode::ParseError, source + ": need a header and rows");
  const std::vector<std::string> header = split_csv(lines[0]);
  const std::size_t k = header.size() - 1;
  if (k == 0) throw Error(ErrorCode::ParseError, source + ": header names no parties");
  if (lines.size() - 1 != k)
    throw Error(ErrorCode::NonSquare, source + ": " + std::to_string(k) + " columns but " +
                                          std::to_string(lines.size() - 1) + " rows");
  SimilarityData out;
  std::vector<std::vector<double>> s(k, std::vector<double>(k));
  bool percent = false;
  for (std::size_t i = 0; i < k; ++i) {
    const std::vector<std::string> f = split_csv(lines[i + 1]);
    const std::string where = source + ":" + std::to_string(i + 2);
    if (f.size() != k + 1)
      throw Error(ErrorCode::NonSquare, where + ": expected " + std::to_string(k + 1) +
                                            " fields, got " + std::to_string(f.size()));
    out.names.push_back(f[0]);
    for (std::size_t j = 0; j < k; ++j) {
      s[i][j] = number_or_throw(f[j + 1], where);
      if (s[i][j] > 1.5) percent = true;
    }
  }
  if (percent) out.warnings.push_back(source + ": scores above 1.5, reading as percent");
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (percent) s[i][j] /= 100.0;
      if (s[i][j] < 0.0 || s[i][j] > 1.0) {
        std::ostringstream os;
        os << source << ": score " << format_double(percent ? 100.0 * s[i][j] : s[i][j])
           << " for (" << out.names[i] << ", " << header[j + 1] << ") is outside the valid range";
        throw Error(ErrorCode::OutOfRangeScore, os.str());
      }
    }

  std::vector<double> others(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (k == 1) {
      others[i] = s[i][i];
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) sum += s[i][j];
    others[i] = sum / static_cast<double>(k - 1);
  }
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> v = s[i];
    v.push_back(others[i]);
    v.push_back(1.0);
    out.vectors.push_back(std::move(v));
  }
  std::vector<double> others_row = others;
  others_row.push_back(1.0);
  others_row.push_back(1.0);
  out.vectors.push_back(std::move(others_row));
  out.vectors.emplace_back(k + 2, 1.0);
  out.names.emplace_back("Others");
  out.names.emplace_back("NV");
  return out;
}

SimilarityData ingest_similarity(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_similarity(in, path);
}

CostMatrix ingest_cost_matrix(const std::string& path) {
  std::ifstream in = open_input(path);
  const std::vector<std::string> lines = read_lines(in);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::vector<std::string> f = split_csv(lines[k]);
    double probe = 0.0;
    if (k == 0 && !parse_number(f[0], probe) && f.size() > 1 && !parse_number(f[1], probe))
      continue;  // header
    std::vector<double> row;
    for (const auto& x : f) row.push_back(number_or_throw(x, path + ":" + std::to_string(k + 1)));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, path + ": no rows");
  const std::size_t n = rows.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw Error(ErrorCode::NonSquare, path + ": cost matrix is not square");
    for (std::size_t j = 0; j < n; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return CostMatrix(std::move(m));
}

Matrix read_plan_csv(std::istream& in, std::size_t n) {
  const std::vector<std::string> lines = read_lines(in);
  if (lines.empty() || split_csv(lines[0]) != std::vector<std::string>{"i", "j", "mass"})
    throw Error(ErrorCode::ParseError, "plan CSV must start with header i,j,mass");
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::vector<std::string> f = split_csv(lines[k]);
    const std::string where = "plan:" + std::to_string(k + 1);
    if (f.size() != 3) throw Error(ErrorCode::ParseError, where + ": expected 3 fields");
    const double i = number_or_throw(f[0], where), j = number_or_throw(f[1], where);
    if (i < 0 || j < 0 || i >= static_cast<double>(n) || j >= static_cast<double>(n))
      throw Error(ErrorCode::ParseError, where + ": index out of range");
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number_or_throw(f[2], where);
  }
  return m;
}

// ---------------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_plan_csv(std::ostream& out, const TransportPlan& plan) {
  const Matrix& p = plan.entries();
  out << "i,j,mass\n";
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      out << i << ',' << j << ',' << format_double(p(i, j)) << '\n';
}

void write_trace_csv(std::ostream& out, const SolveReport& report) {
  out << "iteration,objective,step_size,marginal_residual\n";
  for (const auto& t : report.trace)
    out << t.iteration << ',' << format_double(t.objective) << ',' << format_double(t.step_size)
        << ',' << format_double(t.marginal_residual) << '\n';
}

namespace {

void metrics_csv(std::ostream& out, const ErrorMetrics& m) {
  out << format_double(m.abs_mean) << ',' << format_double(m.abs_std) << ','
      << format_double(m.kl_error) << ',' << format_double(m.mse) << ','
      << format_double(m.transport_distance);
}

const char* kMetricCols = "abs_mean,abs_std,kl_error,mse,transport_distance";

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace

void write_grid_csv(std::ostream& out, const SweepGrid& grid) {
  std::string exact_cols, kl_cols;
  for (std::string_view col : {"abs_mean", "abs_std", "kl_error", "mse", "transport_distance"}) {
    exact_cols += ",exact_" + std::string(col);
    kl_cols += ",kl_" + std::string(col);
  }
  out << "alpha,epsilon,ok,objective,transport_cost,divergence,iterations,termination"
      << exact_cols << kl_cols << ",error\n";
  for (const auto& cell : grid.cells) {
    out << format_double(cell.alpha) << ',' << format_double(cell.epsilon) << ','
        << (cell.ok ? 1 : 0) << ',';
    if (cell.ok) {
      out << format_double(cell.objective) << ',' << format_double(cell.transport_cost) << ','
          << format_double(cell.divergence) << ',' << cell.iterations << ','
          << to_string(cell.termination) << ',';
      metrics_csv(out, cell.vs_exact);
      out << ',';
      if (cell.vs_kl)
        metrics_csv(out, *cell.vs_kl);
      else
        out << ",,,,";
    } else {
      out << ",,,,,,,,,,,,,,";
    }
    out << ',' << csv_quote(cell.error) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "regularizer,order,epsilon,ok,objective,iterations,termination," << kMetricCols
      << ",error\n";
  for (const auto& row : rows) {
    out << to_string(row.spec.kind) << ',' << format_double(row.spec.order) << ','
        << format_double(row.spec.epsilon) << ',' << (row.ok ? 1 : 0) << ',';
    if (row.ok) {
      out << format_double(row.objective) << ',' << row.iterations << ','
          << to_string(row.termination) << ',';
      metrics_csv(out, row.metrics);
    } else {
      out << ",,,,,,,";
    }
    out << ',' << csv_quote(row.error) << '\n';
  }
}

ordered_json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

namespace {

ordered_json matrix_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json_number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v[i]));
  return out;
}

ordered_json regularizer_json(const RegularizerSpec& spec) {
  ordered_json j;
  j["kind"] = std::string(to_string(spec.kind));
  if (spec.kind == RegularizerKind::Renyi) j["alpha"] = json_number(spec.order);
  if (spec.kind == RegularizerKind::Tsallis || spec.kind == RegularizerKind::TsallisEntropy)
    j["q"] = json_number(spec.order);
  j["epsilon"] = json_number(spec.epsilon);
  return j;
}

}  // namespace

ordered_json to_json(const SolveReport& report, bool timing) {
  ordered_json j;
  j["regularizer"] = regularizer_json(report.regularizer);
  j["objective_value"] = json_number(report.objective_value);
  j["transport_cost"] = json_number(report.transport_cost);
  j["divergence_value"] = json_number(report.divergence_value);
  j["iterations"] = report.iterations;
  j["termination"] = std::string(to_string(report.termination));
  if (timing) j["wall_time"] = json_number(report.wall_time);
  j["marginal_residual"] = json_number(report.plan.marginal_residual());
  j["plan"] = matrix_json(report.plan.entries());
  ordered_json trace = ordered_json::array();
  for (const auto& t : report.trace) {
    ordered_json e;
    e["iteration"] = t.iteration;
    e["objective"] = json_number(t.objective);
    e["step_size"] = json_number(t.step_size);
    e["marginal_residual"] = json_number(t.marginal_residual);
    trace.push_back(std::move(e));
  }
  j["trace"] = std::move(trace);
  return j;
}

ordered_json to_json(const DualResult& result, bool timing) {
  ordered_json j = to_json(result.report, timing);
  j["dual_value"] = json_number(result.value);
  j["dual_vector"] = vector_json(result.q);
  ordered_json trace = ordered_json::array();
  for (const auto& t : result.dual_trace) {
    ordered_json e;
    e["iteration"] = t.iteration;
    e["value"] = json_number(t.value);
    e["step"] = json_number(t.step);
    e["max_slack"] = json_number(t.max_slack);
    trace.push_back(std::move(e));
  }
  j["dual_trace"] = std::move(trace);
  return j;
}

ordered_json to_json(const PremetricResult& result, bool timing) {
  ordered_json j = to_json(result.report, timing);
  j["epsilon_star"] = json_number(result.epsilon_star);
  return j;
}

ordered_json to_json(const ErrorMetrics& m) {
  ordered_json j;
  j["abs_mean"] = json_number(m.abs_mean);
  j["abs_std"] = json_number(m.abs_std);
  j["kl_error"] = json_number(m.kl_error);
  j["mse"] = json_number(m.mse);
  j["transport_distance"] = json_number(m.transport_distance);
  return j;
}

ordered_json to_json(const SweepGrid& grid) {
  ordered_json j;
  j["exact_cost"] = json_number(grid.exact_cost);
  ordered_json cells = ordered_json::array();
  for (const auto& cell : grid.cells) {
    ordered_json e;
    e["alpha"] = json_number(cell.alpha);
    e["epsilon"] = json_number(cell.epsilon);
    e["ok"] = cell.ok;
    if (cell.ok) {
      e["objective"] = json_number(cell.objective);
      e["transport_cost"] = json_number(cell.transport_cost);
      e["divergence"] = json_number(cell.divergence);
      e["iterations"] = cell.iterations;
      e["termination"] = std::string(to_string(cell.termination));
      e["vs_exact"] = to_json(cell.vs_exact);
      e["vs_kl"] = cell.vs_kl ? to_json(*cell.vs_kl) : ordered_json(nullptr);
    } else {
      e["error"] = cell.error;
    }
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  return j;
}

ordered_json to_json(const std::vector<ComparisonRow>& rows) {
  ordered_json out = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json e;
    e["regularizer"] = regularizer_json(row.spec);
    e["ok"] = row.ok;
    if (row.ok) {
      e["objective"] = json_number(row.objective);
      e["iterations"] = row.iterations;
      e["termination"] = std::string(to_string(row.termination));
      e["metrics"] = to_json(row.metrics);
    } else {
      e["error"] = row.error;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw Error(ErrorCode::IoError, "failed writing to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace renyi_ot
