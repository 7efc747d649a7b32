#pragma once

#include "renyi_ot/core.hpp"
#include "renyi_ot/experiments.hpp"
#include "renyi_ot/solver.hpp"

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace renyi_ot {

// ---------------------------------------------------------------------------
// Ingestion

struct MarginalData {
  Histogram r;
  Histogram c;
  std::vector<std::string> warnings;  // renormalization / percent notes
};

/// CSV with header `index,r,c` (column order free, extra columns ignored),
/// one row per grid point in index order. Values above 1.5 mark percent
/// data. Each column is renormalized, with a warning when its sum was off by
/// more than 1e-9.
MarginalData ingest_marginals(const std::string& path);
MarginalData parse_marginals(std::istream& in, const std::string& source = "<stream>");

struct SimilarityData {
  std::vector<std::string> names;                // parties, then "Others", "NV"
  std::vector<std::vector<double>> vectors;      // one per name, entries in [0, 1]
  std::vector<std::string> warnings;
};

/// Square similarity table: header row `<label>,P1,...,Pk`, then k rows
/// `Pi,s_i1,...,s_ik`. Scores in percent (any value > 1.5) are divided by
/// 100. Two parties are appended: "Others", whose similarity to party i is the
/// mean of s_ij over the other listed parties j != i, and "NV" with
/// similarity 1 to everything. Vectors have length k + 2.
SimilarityData ingest_similarity(const std::string& path);
SimilarityData parse_similarity(std::istream& in, const std::string& source = "<stream>");

/// Square numeric CSV; an optional non-numeric header row is skipped.
CostMatrix ingest_cost_matrix(const std::string& path);

/// Reads an `i,j,mass` dump back into an N x N matrix.
Matrix read_plan_csv(std::istream& in, std::size_t n);

// ---------------------------------------------------------------------------
// Emission. Every writer is deterministic: same input, same bytes.

/// 17 significant digits ("%.17g" style), locale independent.
std::string format_double(double x);

void write_plan_csv(std::ostream& out, const TransportPlan& plan);
void write_trace_csv(std::ostream& out, const SolveReport& report);
void write_grid_csv(std::ostream& out, const SweepGrid& grid);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// wall_time is left out unless `timing` is set, so that reruns produce
/// identical bytes.
nlohmann::ordered_json to_json(const SolveReport& report, bool timing = false);
nlohmann::ordered_json to_json(const DualResult& result, bool timing = false);
nlohmann::ordered_json to_json(const PremetricResult& result, bool timing = false);
nlohmann::ordered_json to_json(const ErrorMetrics& m);
nlohmann::ordered_json to_json(const SweepGrid& grid);
nlohmann::ordered_json to_json(const std::vector<ComparisonRow>& rows);

/// JSON number for finite values, "inf" / "-inf" / "nan" strings otherwise.
nlohmann::ordered_json json_number(double x);

/// Writes `text` to `path`, or to stdout when path is empty or "-".
/// Raises IoError on failure.
void write_output(const std::string& path, const std::string& text);

}  // namespace renyi_ot
