#pragma once

#include "renyi_ot/core.hpp"
#include "renyi_ot/experiments.hpp"
#include "renyi_ot/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace renyi_ot {

enum class Command { Solve, Project, Sweep, Compare, Voter };
enum class OutputFormat { Csv, Json };

std::string_view to_string(Command c);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNotConverged = 4;

struct RunConfig {
  Command command = Command::Solve;

  // Marginals: read from `marginals_path`, else generated from `family`
  // ("gaussian", "poisson" or "uniform") on n grid points.
  std::string marginals_path;
  std::string family = "gaussian";
  std::size_t n = 50;

  // "sqeuclid", "sqeuclid-scaled", "euclid" or "file"; cost_path for "file".
  std::string cost = "sqeuclid";
  std::string cost_path;
  double cost_scale = 1.0;

  RegularizerSpec regularizer = RegularizerSpec::renyi(0.5, 0.1);
  std::optional<double> gamma;  // premetric mode (solve)
  bool use_dual = false;        // solve the dual (solve)
  bool dual_newton = false;     // Newton instead of subgradient ascent

  MirrorDescentConfig solver{};
  DualConfig dual{};
  NewtonConfig newton{};
  SinkhornConfig sinkhorn{};

  // sweep / compare grids
  std::vector<double> alphas;
  std::vector<double> epsilons;
  std::vector<double> qs;
  int threads = 0;

  std::string kernel_path;  // project
  std::string similarity_path;  // voter
  VoterPhi phi = VoterPhi::Eucl;
  double phi_gamma = 1.0;

  std::uint64_t seed = 0;
  std::string out_path;  // stdout when empty
  std::string trace_path;
  OutputFormat format = OutputFormat::Json;
  bool timing = false;
};

/// Thrown by parse_args for --help; carries the help text.
struct HelpRequested {
  std::string text;
};

/// args excludes the program name. Throws Error(UsageError) on unknown
/// flags, malformed values, out-of-range parameters and missing or
/// nonexistent input paths.
RunConfig parse_args(const std::vector<std::string>& args);

/// Executes a parsed config and returns the exit code. Results go to
/// cfg.out_path, or to `out` when it is empty or "-"; diagnostics and
/// warnings go to `err`. Data and solver errors are reported on `err` and
/// mapped to exit codes, never rethrown.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_args + run with --help and usage handling.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace renyi_ot
