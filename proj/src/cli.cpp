#include "renyi_ot/cli.hpp"

#include "renyi_ot/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace renyi_ot {

using nlohmann::ordered_json;

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Solve: return "solve";
    case Command::Project: return "project";
    case Command::Sweep: return "sweep";
    case Command::Compare: return "compare";
    case Command::Voter: return "voter";
  }
  return "unknown";
}

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::UsageError, msg); }

void require_file(const std::string& path, const std::string& flag) {
  if (!std::filesystem::is_regular_file(path)) usage(flag + ": no such file '" + path + "'");
}

StepRule parse_step(const std::string& s) {
  if (s == "polyak") return PolyakRule{};
  if (s == "armijo") return ArmijoRule{};
  if (s.rfind("constant:", 0) == 0) {
    const std::string v = s.substr(9);
    std::size_t used = 0;
    double eta = 0.0;
    try {
      eta = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty() || !(eta > 0.0) || !std::isfinite(eta))
      usage("--step constant:ETA needs a positive ETA, got '" + v + "'");
    return ConstantRule{eta};
  }
  usage("--step must be polyak, armijo or constant:ETA, got '" + s + "'");
}

VoterPhi parse_phi(const std::string& s) {
  for (VoterPhi p : {VoterPhi::Eucl, VoterPhi::SqEucl, VoterPhi::Riesz, VoterPhi::RBF,
                     VoterPhi::Res}) {
    std::string name(to_string(p));
    std::string lower = s;
    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    if (name == lower) return p;
  }
  usage("--phi must be one of eucl, sqeucl, riesz, rbf, res; got '" + s + "'");
}

RegularizerSpec make_spec(const std::string& kind, double alpha, double q, double eps) {
  try {
    if (kind == "renyi") return RegularizerSpec::renyi(alpha, eps);
    if (kind == "tsallis") return RegularizerSpec::tsallis(q, eps);
    if (kind == "tsallis-entropy") return RegularizerSpec::tsallis_entropy(q, eps);
    if (kind == "kl") return RegularizerSpec::kl(eps);
    if (kind == "none") return RegularizerSpec::none();
  } catch (const Error& e) {
    usage(e.what());
  }
  usage("unknown regularizer '" + kind + "'");
}

// Flag values shared by every subcommand.
struct RawFlags {
  std::string marginals;
  std::string family = "gaussian";
  std::size_t n = 50;
  std::string cost = "sqeuclid";
  double cost_scale = 1.0;
  double alpha = 0.5;
  double q = 1.6;
  double eps = 0.1;
  std::string regularizer = "renyi";
  double gamma = -1.0;
  bool dual = false;
  std::string dual_method = "subgradient";
  std::string step = "armijo";
  double tol = 1e-6;
  bool tol_given = false;
  double inner_tol = 1e-4;
  int max_sweeps = 10000;
  int max_iters = 5000;
  int dual_iters = 20000;
  std::uint64_t seed = 0;
  std::string out;
  std::string trace;
  std::string format = "json";
  bool timing = false;
  std::vector<double> alphas;
  std::vector<double> epsilons;
  std::vector<double> qs;
  int threads = 0;
  std::string kernel;
  std::string similarity;
  std::string phi = "eucl";
  double phi_gamma = 1.0;
};

void add_flags(CLI::App* sub, RawFlags& f) {
  sub->add_option("--marginals", f.marginals, "CSV with columns index,r,c");
  sub->add_option("--family", f.family, "generated marginals when --marginals is absent")
      ->check(CLI::IsMember({"gaussian", "poisson", "uniform"}))
      ->capture_default_str();
  sub->add_option("--n", f.n, "grid size for generated marginals")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--cost", f.cost, "sqeuclid | sqeuclid-scaled | euclid | file:PATH")
      ->capture_default_str();
  sub->add_option("--cost-scale", f.cost_scale, "multiply the cost matrix by this factor")
      ->capture_default_str();
  sub->add_option("--alpha", f.alpha, "Renyi order in (0,1)")->capture_default_str();
  sub->add_option("--q", f.q, "Tsallis order (> 0, != 1)")->capture_default_str();
  sub->add_option("--eps", f.eps, "regularization strength")->capture_default_str();
  sub->add_option("--regularizer", f.regularizer, "renyi | tsallis | tsallis-entropy | kl | none")
      ->check(CLI::IsMember({"renyi", "tsallis", "tsallis-entropy", "kl", "none"}))
      ->capture_default_str();
  sub->add_option("--gamma", f.gamma, "Renyi-ball radius (premetric mode; negative: off)")
      ->capture_default_str();
  sub->add_flag("--dual", f.dual, "solve the dual problem");
  sub->add_option("--dual-method", f.dual_method, "subgradient | newton (with --dual)")
      ->check(CLI::IsMember({"subgradient", "newton"}))
      ->capture_default_str();
  sub->add_option("--step", f.step, "polyak | armijo | constant:ETA")->capture_default_str();
  sub->add_option("--tol", f.tol, "stop when |P_k - P_{k-1}|_F <= tol (1e-7 with --gamma)")
      ->capture_default_str();
  sub->add_option("--inner-tol", f.inner_tol, "Sinkhorn marginal tolerance")
      ->capture_default_str();
  sub->add_option("--max-sweeps", f.max_sweeps, "Sinkhorn sweep budget")->capture_default_str();
  sub->add_option("--max-iters", f.max_iters, "mirror-descent iteration budget")
      ->capture_default_str();
  sub->add_option("--dual-iters", f.dual_iters, "dual ascent iteration budget")
      ->capture_default_str();
  sub->add_option("--seed", f.seed, "recorded; generators are deterministic")
      ->capture_default_str();
  sub->add_option("--out", f.out, "output path (stdout when empty or -)")->capture_default_str();
  sub->add_option("--trace", f.trace, "also write the iteration trace as CSV here");
  sub->add_option("--format", f.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sub->add_flag("--timing", f.timing, "include wall_time in JSON output");
  sub->add_option("--alphas", f.alphas, "comma-separated Renyi orders (sweep, compare)")
      ->delimiter(',');
  sub->add_option("--epsilons", f.epsilons, "comma-separated eps values (sweep, compare)")
      ->delimiter(',');
  sub->add_option("--qs", f.qs, "comma-separated Tsallis orders (compare)")->delimiter(',');
  sub->add_option("--threads", f.threads, "sweep workers (0: RENYI_OT_THREADS or all cores)")
      ->capture_default_str();
  sub->add_option("--kernel", f.kernel, "nonnegative matrix CSV to project (project)");
  sub->add_option("--similarity", f.similarity, "party similarity CSV (voter)");
  sub->add_option("--phi", f.phi, "eucl | sqeucl | riesz | rbf | res (voter)")
      ->capture_default_str();
  sub->add_option("--phi-gamma", f.phi_gamma, "gamma for rbf and res (voter)")
      ->capture_default_str();
}

RunConfig to_config(Command cmd, const RawFlags& f) {
  RunConfig cfg;
  cfg.command = cmd;
  cfg.marginals_path = f.marginals;
  cfg.family = f.family;
  cfg.n = f.n;
  if (!f.marginals.empty()) require_file(f.marginals, "--marginals");

  if (f.cost.rfind("file:", 0) == 0) {
    cfg.cost = "file";
    cfg.cost_path = f.cost.substr(5);
    require_file(cfg.cost_path, "--cost");
  } else if (f.cost == "sqeuclid" || f.cost == "sqeuclid-scaled" || f.cost == "euclid") {
    cfg.cost = f.cost;
  } else {
    usage("--cost must be sqeuclid, sqeuclid-scaled, euclid or file:PATH; got '" + f.cost + "'");
  }
  if (!(f.cost_scale > 0.0) || !std::isfinite(f.cost_scale)) usage("--cost-scale must be positive");
  cfg.cost_scale = f.cost_scale;

  if (!(f.eps >= 0.0) || !std::isfinite(f.eps)) usage("--eps must be finite and nonnegative");
  cfg.regularizer = make_spec(f.regularizer, f.alpha, f.q, f.regularizer == "none" ? 0.0 : f.eps);

  if (f.gamma >= 0.0) cfg.gamma = f.gamma;
  cfg.use_dual = f.dual;
  if ((cfg.gamma || cfg.use_dual) && cfg.regularizer.kind != RegularizerKind::Renyi)
    usage("--gamma and --dual require --regularizer renyi");
  if (cfg.gamma && cfg.use_dual) usage("--gamma and --dual are exclusive");
  if (cfg.use_dual && !(f.eps > 0.0)) usage("--dual requires --eps > 0");

  cfg.solver.step_rule = parse_step(f.step);
  if (!(f.tol > 0.0)) usage("--tol must be positive");
  if (!(f.inner_tol > 0.0)) usage("--inner-tol must be positive");
  if (f.max_iters <= 0 || f.max_sweeps <= 0 || f.dual_iters <= 0)
    usage("iteration budgets must be positive");
  cfg.solver.iterate_tol = f.tol;
  // Premetric bisection has its own tighter default.
  if (cfg.gamma && !f.tol_given) cfg.solver.iterate_tol = PremetricConfig{}.solver.iterate_tol;
  cfg.solver.max_iters = f.max_iters;
  cfg.sinkhorn.marginal_tol = f.inner_tol;
  cfg.sinkhorn.max_sweeps = f.max_sweeps;
  cfg.solver.inner = cfg.sinkhorn;
  cfg.dual.max_iters = f.dual_iters;
  cfg.newton.max_iters = f.dual_iters;
  cfg.dual_newton = f.dual_method == "newton";

  cfg.alphas = f.alphas;
  cfg.epsilons = f.epsilons;
  cfg.qs = f.qs;
  if (cmd == Command::Sweep) {
    if (cfg.alphas.empty()) cfg.alphas = {0.01, 0.1, 0.5, 0.9};
    if (cfg.epsilons.empty()) cfg.epsilons = {0.1, 1.0, 10.0};
  }
  if (cmd == Command::Compare) {
    if (cfg.alphas.empty()) cfg.alphas = {0.01};
    if (cfg.epsilons.empty()) cfg.epsilons = {0.1};
    if (cfg.qs.empty()) cfg.qs = {1.6};
  }
  for (double a : cfg.alphas)
    if (!(a > 0.0 && a < 1.0)) usage("--alphas entries must lie in (0,1)");
  for (double e : cfg.epsilons)
    if (!(e > 0.0) || !std::isfinite(e)) usage("--epsilons entries must be positive");
  for (double q : cfg.qs)
    if (!(q > 0.0) || q == 1.0 || !std::isfinite(q)) usage("--qs entries must be positive, != 1");
  if (f.threads < 0) usage("--threads must be nonnegative");
  cfg.threads = f.threads;

  cfg.kernel_path = f.kernel;
  if (!f.kernel.empty()) require_file(f.kernel, "--kernel");
  if (cmd == Command::Project && f.kernel.empty() && !(f.eps > 0.0))
    usage("project without --kernel needs --eps > 0");

  cfg.similarity_path = f.similarity;
  cfg.phi = parse_phi(f.phi);
  cfg.phi_gamma = f.phi_gamma;
  if (cmd == Command::Voter) {
    if (f.marginals.empty()) usage("voter requires --marginals");
    if (f.similarity.empty()) usage("voter requires --similarity");
    require_file(f.similarity, "--similarity");
  }

  cfg.seed = f.seed;
  cfg.out_path = f.out;
  cfg.trace_path = f.trace;
  cfg.format = f.format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
  cfg.timing = f.timing;
  return cfg;
}

// ---------------------------------------------------------------------------
// Execution

struct Problem {
  Histogram r;
  Histogram c;
  CostMatrix cost;
  std::vector<std::string> names;  // voter only
};

Problem load_problem(const RunConfig& cfg, std::ostream& err) {
  std::optional<Histogram> r, c;
  if (!cfg.marginals_path.empty()) {
    MarginalData md = ingest_marginals(cfg.marginals_path);
    for (const auto& w : md.warnings) err << "warning: " << w << '\n';
    r = md.r;
    c = md.c;
  } else if (cfg.family == "uniform") {
    r = Histogram::uniform(cfg.n);
    c = Histogram::uniform(cfg.n);
  } else {
    auto pair = cfg.family == "poisson" ? default_poisson_pair(cfg.n)
                                        : default_gaussian_pair(cfg.n);
    r = generate_marginal(pair.first, cfg.seed);
    c = generate_marginal(pair.second, cfg.seed);
  }
  const std::size_t n = r->size();

  std::vector<std::string> names;
  std::optional<CostMatrix> cost;
  if (cfg.command == Command::Voter) {
    SimilarityData sd = ingest_similarity(cfg.similarity_path);
    for (const auto& w : sd.warnings) err << "warning: " << w << '\n';
    names = sd.names;
    cost = build_cost_matrix(VoterCost{cfg.phi, cfg.phi_gamma, sd.vectors}, 0);
  } else if (cfg.cost == "file") {
    cost = ingest_cost_matrix(cfg.cost_path);
  } else if (cfg.cost == "sqeuclid-scaled") {
    cost = build_cost_matrix(SqEuclidScaled{}, n);
  } else if (cfg.cost == "euclid") {
    cost = build_cost_matrix(EuclidGrid{}, n);
  } else {
    cost = build_cost_matrix(SqEuclidUnscaled{}, n);
  }
  if (cost->size() != n) {
    std::ostringstream os;
    os << "cost matrix is " << cost->size() << "x" << cost->size() << " but marginals have "
       << n << " entries";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  return Problem{*r, *c, *cost, std::move(names)};
}

std::string plan_csv(const TransportPlan& plan) {
  std::ostringstream os;
  write_plan_csv(os, plan);
  return os.str();
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// Results go to the file named by --out, or to `sink` when there is none.
struct Emitter {
  const RunConfig& cfg;
  std::ostream& sink;

  void operator()(const std::string& text) const {
    if (cfg.out_path.empty() || cfg.out_path == "-") {
      sink << text;
      sink.flush();
      if (!sink) throw Error(ErrorCode::IoError, "failed writing results");
    } else {
      write_output(cfg.out_path, text);
    }
  }
};

void write_trace(const RunConfig& cfg, const SolveReport& report) {
  if (cfg.trace_path.empty()) return;
  std::ostringstream os;
  write_trace_csv(os, report);
  write_output(cfg.trace_path, os.str());
}

int status(const SolveReport& report) { return report.converged() ? kExitOk : kExitNotConverged; }

int run_solve(const RunConfig& cfg, const Problem& p, const Emitter& emit) {
  const CostMatrix cost = cfg.cost_scale == 1.0 ? p.cost : p.cost.scaled(cfg.cost_scale);
  const double alpha = cfg.regularizer.order;
  const double eps = cfg.regularizer.epsilon;
  if (cfg.gamma) {
    PremetricConfig pc;
    pc.solver = cfg.solver;
    PremetricResult res = premetric_ball_solve(cost, p.r, p.c, alpha, *cfg.gamma, pc);
    emit(cfg.format == OutputFormat::Csv ? plan_csv(res.report.plan)
                                         : dump(to_json(res, cfg.timing)));
    write_trace(cfg, res.report);
    return status(res.report);
  }
  if (cfg.use_dual) {
    DualResult res = cfg.dual_newton ? dual_newton(cost, p.r, p.c, alpha, eps, cfg.newton)
                                     : dual_subgradient(cost, p.r, p.c, alpha, eps, cfg.dual);
    emit(cfg.format == OutputFormat::Csv ? plan_csv(res.report.plan)
                                         : dump(to_json(res, cfg.timing)));
    write_trace(cfg, res.report);
    return status(res.report);
  }
  ExperimentConfig ec{cfg.solver, cfg.sinkhorn, 1.0, cfg.threads};
  SolveReport rep = solve_regularized(cost, p.r, p.c, cfg.regularizer, ec);
  emit(cfg.format == OutputFormat::Csv ? plan_csv(rep.plan)
                                       : dump(to_json(rep, cfg.timing)));
  write_trace(cfg, rep);
  return status(rep);
}

int run_project(const RunConfig& cfg, const Problem& p, const Emitter& emit) {
  Matrix kernel;
  if (!cfg.kernel_path.empty()) {
    kernel = ingest_cost_matrix(cfg.kernel_path).entries();
    if (static_cast<std::size_t>(kernel.rows()) != p.r.size())
      throw Error(ErrorCode::DimensionMismatch, "kernel size differs from the marginals");
  } else {
    const Matrix m = p.cost.entries() * cfg.cost_scale;
    kernel = outer_product(p.r, p.c).cwiseProduct((-m / cfg.regularizer.epsilon).array().exp().matrix());
  }
  int code = kExitOk;
  std::optional<TransportPlan> plan;
  int sweeps = 0;
  try {
    plan = sinkhorn_project(kernel, p.r, p.c, cfg.sinkhorn);
  } catch (const SinkhornNotConverged& e) {
    plan = validate_plan(e.best().plan, p.r, p.c, std::numeric_limits<double>::max());
    sweeps = e.best().sweeps;
    code = kExitNotConverged;
  }
  if (cfg.format == OutputFormat::Csv) {
    emit(plan_csv(*plan));
  } else {
    ordered_json j;
    j["converged"] = code == kExitOk;
    if (code != kExitOk) j["sweeps"] = sweeps;
    j["marginal_residual"] = json_number(plan->marginal_residual());
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < plan->entries().rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index k = 0; k < plan->entries().cols(); ++k)
        row.push_back(json_number(plan->entries()(i, k)));
      rows.push_back(std::move(row));
    }
    j["plan"] = std::move(rows);
    emit(dump(j));
  }
  return code;
}

int run_sweep(const RunConfig& cfg, const Problem& p, const Emitter& emit) {
  ExperimentConfig ec{cfg.solver, cfg.sinkhorn, cfg.cost_scale, cfg.threads};
  SweepGrid grid = convergence_sweep(p.cost, p.r, p.c, cfg.alphas, cfg.epsilons, ec);
  std::string text;
  if (cfg.format == OutputFormat::Csv) {
    std::ostringstream os;
    write_grid_csv(os, grid);
    text = os.str();
  } else {
    text = dump(to_json(grid));
  }
  emit(text);
  for (const auto& cell : grid.cells)
    if (!cell.ok || cell.termination != Termination::IterateResidual) return kExitNotConverged;
  return kExitOk;
}

int run_compare(const RunConfig& cfg, const Problem& p, const Emitter& emit) {
  std::vector<RegularizerSpec> specs;
  for (double eps : cfg.epsilons) {
    for (double a : cfg.alphas) specs.push_back(RegularizerSpec::renyi(a, eps));
    for (double q : cfg.qs) {
      specs.push_back(RegularizerSpec::tsallis(q, eps));
      specs.push_back(RegularizerSpec::tsallis_entropy(q, eps));
    }
    specs.push_back(RegularizerSpec::kl(eps));
  }
  ExperimentConfig ec{cfg.solver, cfg.sinkhorn, cfg.cost_scale, cfg.threads};
  auto rows = regularizer_comparison(p.cost, p.r, p.c, specs, ec);
  std::string text;
  if (cfg.format == OutputFormat::Csv) {
    std::ostringstream os;
    write_comparison_csv(os, rows);
    text = os.str();
  } else {
    text = dump(to_json(rows));
  }
  emit(text);
  for (const auto& row : rows)
    if (!row.ok || row.termination != Termination::IterateResidual) return kExitNotConverged;
  return kExitOk;
}

int run_voter(const RunConfig& cfg, const Problem& p, const Emitter& emit) {
  ExperimentConfig ec{cfg.solver, cfg.sinkhorn, cfg.cost_scale, cfg.threads};
  SolveReport rep = solve_regularized(p.cost, p.r, p.c, cfg.regularizer, ec);
  const Matrix& m = rep.plan.entries();
  if (cfg.format == OutputFormat::Csv) {
    std::ostringstream os;
    os << "from,to,mass\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k)
        os << p.names[i] << ',' << p.names[k] << ',' << format_double(m(i, k)) << '\n';
    emit(os.str());
  } else {
    ordered_json j;
    j["parties"] = p.names;
    j["report"] = to_json(rep, cfg.timing);
    emit(dump(j));
  }
  write_trace(cfg, rep);
  return status(rep);
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError: return kExitUsage;
    case ErrorCode::MaxSweepsExceeded:
    case ErrorCode::NumericalUnderflow:
    case ErrorCode::InnerProjectionFailure:
    case ErrorCode::ZeroGradient:
    case ErrorCode::InfeasibleDuals:
    case ErrorCode::BisectionFailure: return kExitNotConverged;
    default: return kExitData;
  }
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Renyi-regularized optimal transport", "renyi-ot"};
  app.require_subcommand(1, 1);
  RawFlags flags;
  CLI::App* subs[] = {
      app.add_subcommand("solve", "solve one regularized problem"),
      app.add_subcommand("project", "KL-project a kernel onto the transport polytope"),
      app.add_subcommand("sweep", "(alpha, eps) convergence grid"),
      app.add_subcommand("compare", "Renyi vs Tsallis vs KL against the exact plan"),
      app.add_subcommand("voter", "voter migration from election data"),
  };
  for (CLI::App* s : subs) add_flags(s, flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    for (CLI::App* s : subs)
      if (s->parsed()) throw HelpRequested{s->help()};
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    usage(e.what());
  }
  const Command cmds[] = {Command::Solve, Command::Project, Command::Sweep, Command::Compare,
                          Command::Voter};
  for (std::size_t k = 0; k < 5; ++k)
    if (subs[k]->parsed()) {
      flags.tol_given = subs[k]->count("--tol") > 0;
      return to_config(cmds[k], flags);
    }
  usage("a subcommand is required");
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const Problem p = load_problem(cfg, err);
    const Emitter emit{cfg, out};
    int code = kExitOk;
    switch (cfg.command) {
      case Command::Solve: code = run_solve(cfg, p, emit); break;
      case Command::Project: code = run_project(cfg, p, emit); break;
      case Command::Sweep: code = run_sweep(cfg, p, emit); break;
      case Command::Compare: code = run_compare(cfg, p, emit); break;
      case Command::Voter: code = run_voter(cfg, p, emit); break;
    }
    if (code == kExitNotConverged) err << "warning: solver did not converge; best iterate emitted\n";
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  RunConfig cfg;
  try {
    cfg = parse_args(args);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  }
  return run(cfg, out, err);
}

}  // namespace renyi_ot
