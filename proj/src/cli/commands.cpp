#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include <json.hpp>

#include "branchtrace/cli.hpp"
#include "branchtrace/continuation.hpp"
#include "branchtrace/fd.hpp"
#include "branchtrace/io.hpp"

namespace branchtrace::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json report_json(const LmReport& r) {
  return {{"iterations", r.iterations},
          {"accepted_steps", r.accepted_steps},
          {"final_residual_norm", r.final_residual_norm},
          {"final_residual_l2", r.final_residual_l2},
          {"termination", to_string(r.termination)}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void start_run(const RunConfig& c) {
  fs::create_directories(c.out);
  write_text(c.out / "run.json", to_json(c));
}

std::vector<std::string> coordinate_header(const Grid& g) {
  return g.dim() == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
}

std::vector<std::string> coordinate_cells(const Grid& g, const Point& x) {
  std::vector<std::string> cells{format_double(x[0])};
  if (g.dim() == 2) cells.push_back(format_double(x[1]));
  return cells;
}

std::optional<double> exact_at(const Problem& p, double mu, Branch branch, const Point& x) {
  try {
    return exact_solution(p, mu, branch, x);
  } catch (const NoRoot&) {
    return std::nullopt;
  }
}

std::optional<double> asymptotic_or_empty(const Problem& p, double mu, Branch branch) {
  if (p.equation != Equation::bratu_1d && p.equation != Equation::burgers_mixed) return std::nullopt;
  try {
    return asymptotic_lambda(p, mu, branch);
  } catch (const Error&) {
    return std::nullopt;
  }
}

LmOptions corrector_options(const RunConfig& c) {
  LmOptions o = c.method == Method::fd ? fd_default_options() : nn_default_options().lm;
  o.max_iter = *c.corrector_iters;
  return o;
}

Nn3Options eigen_options(const RunConfig& c) {
  Nn3Options o = nn3_default_options();
  o.seed = *c.seed;
  return o;
}

NnSystem eigen_system_of(const RunConfig& c, const Grid& g) {
  return eigen_system(problem_of(c), g, *c.seed, c.weights);
}

// The nn1 solve, with seed retries when the network has the default mask.
NnSolveResult solve_network(const RunConfig& c, const NnSystem& sys, double mu, Branch branch, json& info) {
  if (mask_of(c) == default_network(sys.problem, 0).mask()) {
    SeededSolve s = nn1_solve_branch(sys, mu, branch, *c.seed, nn_default_options());
    info["seed_used"] = s.seed;
    info["attempts"] = s.attempts;
    return std::move(s.result);
  }
  info["seed_used"] = *c.seed;
  info["attempts"] = 1;
  return nn1_solve(sys, mu, network_of(c, *c.seed, branch));
}

void write_eigenfunction_rows(std::vector<std::vector<std::string>>& rows, std::size_t step, const Mlp& v,
                              const Grid& g) {
  for (const auto& x : g.all_points()) {
    auto cells = coordinate_cells(g, x);
    cells.insert(cells.begin(), std::to_string(step));
    cells.push_back(format_double(v.forward(x)));
    rows.push_back(std::move(cells));
  }
}

std::vector<std::string> eigenfunction_header(const Grid& g) {
  auto h = coordinate_header(g);
  h.insert(h.begin(), "step");
  h.push_back("v");
  return h;
}

// Closed-form branch sampled on the interior of g: (μ, sup, l2) rows.
std::vector<std::vector<std::string>> reference_diagram(const Problem& p, const Grid& g) {
  std::vector<std::vector<std::string>> rows;
  const double vol = interior_cell_volume(g);
  for (int i = 1; i <= 400; ++i) {
    const double k = 8.0 * i / 400.0;  // ω for Bratu, √(2c)/(2ν) for Burgers
    double mu = 0.0;
    double sup = 0.0;
    double acc = 0.0;
    for (const auto& x : g.interior()) {
      double u = 0.0;
      if (p.equation == Equation::bratu_1d) {
        u = bratu1d_exact(x[0], k);
      } else {
        u = burgers_mixed_exact(x[0], p.nu, 2.0 * p.nu * p.nu * k * k);
      }
      sup = std::max(sup, std::fabs(u));
      acc += u * u;
    }
    if (p.equation == Equation::bratu_1d) {
      const double s = 1.0 / std::cosh(k);
      mu = 8.0 * k * k * s * s;
    } else {
      mu = phi_of_c(2.0 * p.nu * p.nu * k * k, p.nu);
    }
    rows.push_back({format_double(mu), format_double(sup), format_double(std::sqrt(vol * acc))});
  }
  return rows;
}

std::optional<double> known_fold(const Problem& p) {
  switch (p.equation) {
    case Equation::bratu_1d: return bratu1d_critical_load();
    case Equation::bratu_2d: return 6.808124423;
    case Equation::burgers_mixed: return burgers_mixed_fold(p.nu).phi;
    case Equation::burgers_dirichlet: break;
  }
  return std::nullopt;
}

void write_fd_state(const fs::path& path, const FdState& s) {
  std::vector<std::vector<std::string>> rows;
  const Vector full = fd_full_values(s);
  const auto& pts = s.grid.all_points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto cells = coordinate_cells(s.grid, pts[i]);
    cells.push_back(format_double(full[i]));
    rows.push_back(std::move(cells));
  }
  auto h = coordinate_header(s.grid);
  h.push_back("u");
  write_csv(path, h, rows);
}

FdState read_fd_state(const fs::path& path, const Problem& p, const Grid& g, double mu) {
  const CsvTable t = read_csv(path);
  const std::size_t col = t.column("u");
  if (t.rows.size() != g.all_points().size()) throw Error("state file " + path.string() + " does not match the grid");
  FdState s{p, g, Vector(fd_unknowns(g)), mu};
  const auto& idx = g.interior_index();
  for (std::size_t k = 0; k < idx.size(); ++k) s.u[k] = std::stod(t.rows[idx[k]][col]);
  return s;
}

// λ_max of the nn3 problem about a background; empty on failure.
std::optional<double> nn3_or_empty(const RunConfig& c, const Grid& g, double mu, std::span<const Jet> bg,
                                   std::optional<Mlp>* eigenfunction, std::ostream& log) {
  try {
    EigenSolveResult e = nn3_solve(eigen_system_of(c, g), mu, bg, eigen_options(c));
    if (eigenfunction) *eigenfunction = e.v;
    return e.lambda;
  } catch (const Error& e) {
    log << "  nn3 at mu=" << format_double(mu) << " failed: " << e.what() << "\n";
    return std::nullopt;
  }
}

}  // namespace

// --- solve -------------------------------------------------------------------

int cmd_solve(const RunConfig& c, std::ostream& log) {
  start_run(c);
  const Problem p = problem_of(c);
  const Grid g(p.dim(), c.n);
  const double mu = *c.mu;
  json result{{"method", to_string(c.method)}, {"mu", mu}, {"branch", to_string(c.branch)}};
  Vector u(g.all_points().size());
  if (c.method == Method::fd) {
    const FdSolveResult r = fd_solve(p, g, mu, fd_initial_guess(p, g, c.branch));
    u = fd_full_values(r.state);
    result["report"] = report_json(r.report);
  } else {
    const NnSystem sys{p, g, network_of(c, *c.seed, c.branch), c.weights};
    const NnSolveResult r = solve_network(c, sys, mu, c.branch, result);
    save_checkpoint(r.net, c.out / "weights.json");
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = r.net.forward(g.all_points()[i]);
    result["report"] = report_json(r.report);
  }

  const auto& pts = g.all_points();
  std::vector<std::optional<double>> exact(pts.size());
  bool have_exact = true;
  for (std::size_t i = 0; i < pts.size() && have_exact; ++i) {
    exact[i] = exact_at(p, mu, c.branch, pts[i]);
    have_exact = exact[i].has_value();
  }
  auto header = coordinate_header(g);
  header.push_back("u_" + std::string(to_string(c.method)));
  if (have_exact) {
    header.push_back("u_exact");
    header.push_back("abs_err");
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto cells = coordinate_cells(g, pts[i]);
    cells.push_back(format_double(u[i]));
    if (have_exact) {
      cells.push_back(format_double(*exact[i]));
      cells.push_back(format_double(std::fabs(u[i] - *exact[i])));
    }
    rows.push_back(std::move(cells));
  }
  write_csv(c.out / "solution.csv", header, rows);

  if (have_exact) {
    double acc = 0.0;
    for (auto k : g.interior_index()) acc += (u[k] - *exact[k]) * (u[k] - *exact[k]);
    const double mse = acc / static_cast<double>(g.interior_index().size());
    result["mse"] = mse;
    log << "mse " << format_double(mse) << "\n";
  } else {
    result["mse"] = nullptr;
    log << "mse n/a (no closed-form solution)\n";
  }
  write_text(c.out / "result.json", result.dump(2) + "\n");
  log << "residual " << format_double(result["report"]["final_residual_norm"].get<double>()) << " after "
      << result["report"]["iterations"].get<std::size_t>() << " iterations\n";
  return exit_ok;
}

// --- continue ----------------------------------------------------------------

int cmd_continue(const RunConfig& c, std::ostream& log) {
  start_run(c);
  const Problem p = problem_of(c);
  const Grid g(p.dim(), c.n);

  ContinuationConfig cc;
  cc.delta = *c.delta;
  cc.tau = c.tau;
  cc.max_steps = c.max_steps;
  cc.mu_min = c.mu_min;
  cc.mu_max = c.mu_max.value_or(std::numeric_limits<double>::infinity());
  cc.norm = c.norm;
  cc.beta = c.weights.beta;
  cc.corrector = corrector_options(c);
  cc.accept_tol = *c.accept_tol;

  std::unique_ptr<FdParamSystem> fdsys;
  std::unique_ptr<NnParamSystem> nnsys;
  const ParamSystem* sys = nullptr;
  Vector guess;
  StabilityFn stability;
  if (c.method == Method::fd) {
    fdsys = std::make_unique<FdParamSystem>(p, g);
    sys = fdsys.get();
    guess = fd_initial_guess(p, g, Branch::lower);
    stability = [&](const BranchPoint& pt) -> std::optional<double> {
      try {
        return fd_stability(fdsys->state(pt.z, pt.mu));
      } catch (const Error& e) {
        log << "  fd stability at mu=" << format_double(pt.mu) << " failed: " << e.what() << "\n";
        return std::nullopt;
      }
    };
  } else {
    const Mlp init = network_of(c, *c.seed, Branch::lower);
    nnsys = std::make_unique<NnParamSystem>(NnSystem{p, g, init, c.weights});
    sys = nnsys.get();
    guess.assign(init.weights().begin(), init.weights().end());
    stability = [&](const BranchPoint& pt) {
      const Mlp net = nnsys->network(pt.z);
      return nn3_or_empty(c, g, pt.mu, background_from_network(net, g), nullptr, log);
    };
  }

  BranchTrace trace =
      trace_branch(*sys, *c.mu_start, guess, cc, c.stability == StabilityMode::all ? stability : StabilityFn{});
  log << "traced " << trace.points.size() << " points, stopped on " << to_string(trace.stop);
  if (!trace.message.empty()) log << " (" << trace.message << ")";
  log << "\n";

  json fold_info{{"stop_reason", to_string(trace.stop)}, {"points", trace.points.size()}, {"delta", trace.delta}};
  if (!trace.message.empty()) fold_info["message"] = trace.message;
  std::optional<Fold> fold;
  try {
    fold = detect_fold(trace.points);
  } catch (const NoFold&) {
  }
  if (fold) {
    if (c.stability == StabilityMode::fold)
      for (std::size_t k = fold->index - 1; k <= fold->index + 1; ++k)
        trace.points[k].lambda_max = stability(trace.points[k]);
    fold_info["mu_star"] = fold->mu_star;
    fold_info["index"] = fold->index;
    fold_info["offset"] = fold->offset;
    if (const auto ref = known_fold(p)) {
      fold_info["reference_mu_star"] = *ref;
      fold_info["error"] = fold->mu_star - *ref;
    }
    std::optional<double> lam;
    try {
      lam = fold_lambda(trace.points, *fold);
    } catch (const Error&) {
    }
    fold_info["lambda_at_fold"] = optional_json(lam);
    log << "fold at mu* = " << format_double(fold->mu_star) << " (point " << fold->index << ")\n";
  } else {
    fold_info["mu_star"] = nullptr;
    fold_info["index"] = nullptr;
    log << "no fold on the traced branch\n";
  }
  write_text(c.out / "fold.json", fold_info.dump(2) + "\n");
  write_branch_csv(c.out / "branch.csv", trace.points);

  fs::create_directories(c.out / "checkpoints");
  for (const auto& pt : trace.points) {
    const fs::path base = c.out / "checkpoints" / std::to_string(pt.index);
    if (nnsys) {
      save_checkpoint(nnsys->network(pt.z), base.string() + ".weights.json");
    } else {
      write_fd_state(base.string() + ".state.csv", fdsys->state(pt.z, pt.mu));
    }
  }
  if (p.equation == Equation::bratu_1d || p.equation == Equation::burgers_mixed)
    write_csv(c.out / "reference.csv", {"mu", "norm_inf", "norm_2"}, reference_diagram(p, g));
  return exit_ok;
}

// --- stability ---------------------------------------------------------------

int cmd_stability(const RunConfig& c, std::ostream& log) {
  start_run(c);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> eig_rows;
  const std::vector<std::string> header{"step", "mu", "lambda_nn3", "lambda_fd", "lambda_asymptotic"};

  if (c.from.empty()) {
    const Problem p = problem_of(c);
    const Grid g(p.dim(), c.n);
    const double mu = *c.mu;
    std::optional<double> lam_nn;
    std::optional<double> lam_fd;
    try {
      json info;
      const NnSystem sys{p, g, network_of(c, *c.seed, c.branch), c.weights};
      const NnSolveResult r = solve_network(c, sys, mu, c.branch, info);
      std::optional<Mlp> v;
      lam_nn = nn3_or_empty(c, g, mu, background_from_network(r.net, g), &v, log);
      if (v) write_eigenfunction_rows(eig_rows, 0, *v, g);
    } catch (const Error& e) {
      log << "  network solve failed: " << e.what() << "\n";
    }
    try {
      const Grid gf(p.dim(), *c.fd_n);
      const FdSolveResult r = fd_solve(p, gf, mu, fd_initial_guess(p, gf, c.branch));
      lam_fd = fd_stability(r.state);
    } catch (const Error& e) {
      log << "  finite-difference solve failed: " << e.what() << "\n";
    }
    const auto lam_as = asymptotic_or_empty(p, mu, c.branch);
    rows.push_back({"0", format_double(mu), format_optional(lam_nn), format_optional(lam_fd), format_optional(lam_as)});
    log << "lambda_nn3 " << format_optional(lam_nn) << "  lambda_fd " << format_optional(lam_fd)
        << "  lambda_asymptotic " << format_optional(lam_as) << "\n";
    write_csv(c.out / "eigenfunction.csv", eigenfunction_header(g), eig_rows);
  } else {
    RunConfig rc = config_from_json(read_text(c.from / "run.json"));
    rc.seed = c.seed;
    rc.weights.gamma = c.weights.gamma;
    const Problem p = problem_of(rc);
    const Grid g(p.dim(), rc.n);
    const CsvTable branch = read_csv(c.from / "branch.csv");
    const std::size_t col_step = branch.column("step");
    const std::size_t col_mu = branch.column("mu");
    std::vector<double> mus;
    for (const auto& r : branch.rows) mus.push_back(std::stod(r[col_mu]));
    std::optional<Fold> fold;
    try {
      fold = detect_fold(std::span<const double>(mus));
    } catch (const NoFold&) {
    }
    for (std::size_t i = 0; i < branch.rows.size(); i += c.every) {
      const std::size_t step = std::stoul(branch.rows[i][col_step]);
      const double mu = mus[i];
      const bool upper = fold && static_cast<double>(i) > static_cast<double>(fold->index) + fold->offset;
      const bool export_v = std::find(c.points.begin(), c.points.end(), step) != c.points.end();
      const fs::path base = c.from / "checkpoints" / std::to_string(step);
      std::optional<double> lam_nn;
      std::optional<double> lam_fd;
      std::optional<Mlp> v;
      try {
        if (rc.method == Method::nn) {
          const Mlp net = load_checkpoint(base.string() + ".weights.json");
          lam_nn = nn3_or_empty(rc, g, mu, background_from_network(net, g), &v, log);
          const Grid gf(p.dim(), *c.fd_n);
          Vector u0(fd_unknowns(gf));
          for (std::size_t k = 0; k < u0.size(); ++k) u0[k] = net.forward(gf.interior()[k]);
          lam_fd = fd_stability(fd_solve(p, gf, mu, std::move(u0)).state);
        } else {
          const FdState s = read_fd_state(base.string() + ".state.csv", p, g, mu);
          lam_nn = nn3_or_empty(rc, g, mu, background_from_fd(s), &v, log);
          lam_fd = fd_stability(s);
        }
      } catch (const Error& e) {
        log << "  point " << step << " failed: " << e.what() << "\n";
      }
      if (export_v && v) write_eigenfunction_rows(eig_rows, step, *v, g);
      const auto lam_as = asymptotic_or_empty(p, mu, upper ? Branch::upper : Branch::lower);
      rows.push_back({std::to_string(step), format_double(mu), format_optional(lam_nn), format_optional(lam_fd),
                      format_optional(lam_as)});
    }
    log << "annotated " << rows.size() << " points\n";
    write_csv(c.out / "eigenfunction.csv", eigenfunction_header(g), eig_rows);
  }
  write_csv(c.out / "stability.csv", header, rows);
  return exit_ok;
}

// --- table1 ------------------------------------------------------------------

int cmd_table1(const RunConfig& c, std::ostream& log) {
  start_run(c);
  const Problem p = problem_of(c);
  const Grid g(1, c.n);
  std::vector<std::vector<std::string>> rows;
  bool violated = false;
  bool failed = false;
  for (Branch b : {Branch::lower, Branch::upper}) {
    for (double load : {1.0, 1.5, 2.0, 2.5, 3.0}) {
      std::optional<double> fd;
      std::optional<double> nn;
      try {
        fd = fd_mse(fd_solve(p, g, load, fd_initial_guess(p, g, b)).state, b);
      } catch (const Error& e) {
        log << "  fd " << to_string(b) << " C=" << load << " failed: " << e.what() << "\n";
      }
      try {
        json info;
        const NnSystem sys{p, g, network_of(c, *c.seed, b), c.weights};
        nn = nn_mse(solve_network(c, sys, load, b, info).net, p, g, load, b);
      } catch (const Error& e) {
        log << "  nn " << to_string(b) << " C=" << load << " failed: " << e.what() << "\n";
      }
      const bool ok = fd && nn && *nn < *fd;
      failed = failed || !fd || !nn;
      violated = violated || !ok;
      rows.push_back({std::string(to_string(b)), format_double(load), format_optional(fd), format_optional(nn),
                      ok ? "true" : "false"});
      log << to_string(b) << " C=" << load << "  fd " << format_optional(fd) << "  nn " << format_optional(nn)
          << (ok ? "" : "  <-- NN not below FD") << "\n";
    }
  }
  write_csv(c.out / "table1.csv", {"branch", "C", "fd_mse", "nn_mse", "nn_below_fd"}, rows);
  if (failed) return exit_nonconvergence;
  return violated ? exit_assertion : exit_ok;
}

// --- dispatch ----------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  auto print_report = [&](const LmReport& r) { err << "solver report: " << report_json(r).dump() << "\n"; };
  try {
    const auto parsed = parse_args(argc, argv);
    if (!parsed) return exit_ok;
    const RunConfig c = resolve(*parsed);
    switch (c.command) {
      case Command::solve: return cmd_solve(c, log);
      case Command::continuation: return cmd_continue(c, log);
      case Command::stability: return cmd_stability(c, log);
      case Command::table1: return cmd_table1(c, log);
    }
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return exit_invalid_config;
  } catch (const NonConvergence& e) {
    err << "no convergence: " << e.what() << "\n";
    print_report(e.report);
    return exit_nonconvergence;
  } catch (const SingularNormalEquations& e) {
    err << "no convergence: " << e.what() << "\n";
    print_report(e.report);
    return exit_nonconvergence;
  } catch (const BootstrapFailed& e) {
    err << "no convergence: " << e.what() << "\n";
    return exit_nonconvergence;
  } catch (const NoRoot& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return exit_invalid_config;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_nonconvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_assertion;
  }
  return exit_ok;
}

}  // namespace branchtrace::cli
