#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "branchtrace/cli.hpp"

namespace branchtrace::cli {

using nlohmann::json;

std::string_view to_string(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::continuation: return "continue";
    case Command::stability: return "stability";
    case Command::table1: return "table1";
  }
  return "?";
}

std::string_view to_string(Method m) { return m == Method::fd ? "fd" : "nn"; }

std::string_view to_string(StabilityMode m) {
  switch (m) {
    case StabilityMode::none: return "none";
    case StabilityMode::fold: return "fold";
    case StabilityMode::all: return "all";
  }
  return "?";
}

namespace {

Equation parse_equation(std::string s) {
  for (auto& ch : s)
    if (ch == '-') ch = '_';
  for (Equation e : {Equation::bratu_1d, Equation::bratu_2d, Equation::burgers_dirichlet, Equation::burgers_mixed})
    if (s == to_string(e)) return e;
  throw ConfigError("unknown problem '" + s + "'");
}

Method parse_method(const std::string& s) {
  if (s == "fd") return Method::fd;
  if (s == "nn") return Method::nn;
  throw ConfigError("unknown method '" + s + "' (expected fd or nn)");
}

Branch parse_branch(const std::string& s) {
  if (s == "lower") return Branch::lower;
  if (s == "upper") return Branch::upper;
  throw ConfigError("unknown branch '" + s + "' (expected lower or upper)");
}

BranchNorm parse_norm(const std::string& s) {
  if (s == "sup" || s == "inf") return BranchNorm::sup;
  if (s == "l2") return BranchNorm::l2;
  throw ConfigError("unknown norm '" + s + "' (expected sup or l2)");
}

StabilityMode parse_stability(const std::string& s) {
  if (s == "none") return StabilityMode::none;
  if (s == "fold") return StabilityMode::fold;
  if (s == "all") return StabilityMode::all;
  throw ConfigError("unknown stability mode '" + s + "' (expected none, fold or all)");
}

Command parse_command(const std::string& s) {
  for (Command c : {Command::solve, Command::continuation, Command::stability, Command::table1})
    if (s == to_string(c)) return c;
  throw ConfigError("unknown command '" + s + "'");
}

std::string_view norm_name(BranchNorm n) { return n == BranchNorm::sup ? "sup" : "l2"; }

// Raw option text, converted after parsing so errors carry our wording.
struct RawOptions {
  std::string problem = "bratu1d", method = "nn", branch = "lower", norm = "sup", stability = "none",
              activation = "tanh";
  std::optional<double> mu, mu_start, mu_max, delta, accept_tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> fd_n, corrector_iters;
};

}  // namespace

std::optional<RunConfig> parse_args(int argc, const char* const* argv) {
  CLI::App app{"Steady states, fold continuation and stability of Bratu and Burgers problems"};
  app.require_subcommand(1);
  RunConfig c;
  RawOptions raw;

  auto common = [&](CLI::App* s) {
    s->add_option("--problem", raw.problem, "bratu1d, bratu2d, burgers-dirichlet or burgers-mixed");
    s->add_option("--method", raw.method, "fd or nn");
    s->add_option("--n", c.n, "grid subintervals per direction (default 100 in 1D, 40 in 2D)");
    s->add_option("--nu", c.nu, "Burgers viscosity");
    s->add_option("--seed", raw.seed, "network initialisation seed (else $BRANCHTRACE_SEED, else 0)");
    s->add_option("--activation", raw.activation, "tanh, sigmoid or gaussian");
    s->add_option("--mask", c.mask, "auto, none, sin_pi_x or sin_pi_x_sin_pi_y");
    s->add_option("--alpha", c.weights.alpha, "boundary row weight");
    s->add_option("--beta", c.weights.beta, "arclength row weight");
    s->add_option("--gamma", c.weights.gamma, "eigenfunction norm row weight");
    s->add_option("--out", c.out, "run directory");
  };
  auto fixed_mu = [&](CLI::App* s) {
    s->add_option("--mu,--C,--phi,--rho", raw.mu, "parameter value");
    s->add_option("--branch", raw.branch, "lower or upper");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve at one parameter value");
  common(solve);
  fixed_mu(solve);

  CLI::App* cont = app.add_subcommand("continue", "trace a branch by pseudo-arclength continuation");
  common(cont);
  cont->add_option("--mu-start", raw.mu_start, "parameter of the first point");
  cont->add_option("--mu-min", c.mu_min, "stop once the parameter drops below this");
  cont->add_option("--mu-max", raw.mu_max, "stop once the parameter exceeds this");
  cont->add_option("--delta", raw.delta, "arclength spacing");
  cont->add_option("--tau", c.tau, "predictor step factor");
  cont->add_option("--max-steps", c.max_steps, "maximum number of branch points");
  cont->add_option("--norm", raw.norm, "sup or l2");
  cont->add_option("--accept-tol", raw.accept_tol, "corrector acceptance tolerance");
  cont->add_option("--corrector-iters", raw.corrector_iters, "corrector iteration limit");
  cont->add_option("--stability", raw.stability, "none, fold or all");

  CLI::App* stab = app.add_subcommand("stability", "largest eigenvalue of the linearised operator");
  common(stab);
  fixed_mu(stab);
  stab->add_option("--fd-n", raw.fd_n, "grid for the finite-difference eigenvalue (default 1000 in 1D)");
  stab->add_option("--from", c.from, "continuation run directory to annotate");
  stab->add_option("--points", c.points, "steps whose eigenfunctions are exported")->delimiter(',');
  stab->add_option("--every", c.every, "annotate every k-th point of a branch");

  CLI::App* table = app.add_subcommand("table1", "NN and FD errors against the closed-form 1D Bratu solutions");
  common(table);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  for (CLI::App* s : app.get_subcommands()) c.command = parse_command(s->get_name());
  c.problem = parse_equation(raw.problem);
  c.method = parse_method(raw.method);
  c.branch = parse_branch(raw.branch);
  c.norm = parse_norm(raw.norm);
  c.stability = parse_stability(raw.stability);
  try {
    c.activation = parse_activation(raw.activation);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.mu = raw.mu;
  c.mu_start = raw.mu_start;
  c.mu_max = raw.mu_max;
  c.delta = raw.delta;
  c.accept_tol = raw.accept_tol;
  c.corrector_iters = raw.corrector_iters;
  c.seed = raw.seed;
  c.fd_n = raw.fd_n;
  return c;
}

Problem problem_of(const RunConfig& c) { return Problem{c.problem, c.nu}; }

BoundaryMask mask_of(const RunConfig& c) {
  const Problem p = problem_of(c);
  if (c.mask == "auto") {
    if (!p.is_bratu()) return BoundaryMask::none;
    return p.dim() == 1 ? BoundaryMask::sin_pi_x : BoundaryMask::sin_pi_x_sin_pi_y;
  }
  return parse_mask(c.mask);
}

Mlp network_of(const RunConfig& c, std::uint64_t seed, Branch branch) {
  const Mlp d = default_network(problem_of(c), seed, branch, c.activation);
  const BoundaryMask m = mask_of(c);
  if (m == d.mask()) return d;
  const double bias = d.weights()[d.output_bias_index()];
  return Mlp::init_random(d.inputs(), d.hidden_layers(), d.width(), d.activation(), m, seed, 0.01, bias);
}

RunConfig resolve(RunConfig c) {
  const Problem p = problem_of(c);
  const bool bratu = p.is_bratu();
  if (!(c.nu > 0.0)) throw ConfigError("--nu must be positive");
  if (c.n == 0) c.n = p.dim() == 1 ? 100 : 40;
  if (c.n < 2) throw ConfigError("--n must be at least 2");

  if (!c.seed) {
    c.seed = 0;
    if (const char* env = std::getenv("BRANCHTRACE_SEED")) {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("BRANCHTRACE_SEED is not an unsigned integer: ") + env);
      }
    }
  }

  BoundaryMask m;
  try {
    m = mask_of(c);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (m != BoundaryMask::none && !bratu)
    throw ConfigError("a boundary mask only enforces homogeneous Dirichlet data; Burgers problems need --mask none");
  if (m == BoundaryMask::sin_pi_x && p.dim() != 1) throw ConfigError("mask sin_pi_x needs a 1D problem");
  if (m == BoundaryMask::sin_pi_x_sin_pi_y && p.dim() != 2) throw ConfigError("mask sin_pi_x_sin_pi_y needs a 2D problem");
  if (!(c.weights.alpha > 0.0 && c.weights.beta > 0.0 && c.weights.gamma > 0.0))
    throw ConfigError("--alpha, --beta and --gamma must be positive");

  if (!c.mu) {
    switch (c.problem) {
      case Equation::bratu_1d:
      case Equation::bratu_2d: c.mu = 1.0; break;
      case Equation::burgers_dirichlet: c.mu = rho_of_nu(c.nu); break;
      case Equation::burgers_mixed: c.mu = 0.06; break;
    }
  }
  if (!std::isfinite(*c.mu)) throw ConfigError("the parameter must be finite");
  if (c.problem == Equation::burgers_dirichlet && c.branch == Branch::upper)
    throw ConfigError("the Dirichlet Burgers problem has a single solution branch");

  if (!c.mu_start) c.mu_start = c.problem == Equation::burgers_mixed ? 0.01 : 0.1;
  if (!c.delta) c.delta = bratu ? 0.05 : 0.02;
  if (!(*c.delta > 0.0)) throw ConfigError("--delta must be positive");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("--tau must lie in (0, 1]");
  if (c.max_steps < 3) throw ConfigError("--max-steps must be at least 3");
  if (c.mu_max && !(*c.mu_max > c.mu_min)) throw ConfigError("--mu-max must exceed --mu-min");
  if (!(*c.mu_start >= c.mu_min) || (c.mu_max && *c.mu_start > *c.mu_max))
    throw ConfigError("--mu-start lies outside [mu-min, mu-max]");
  if (!c.accept_tol) c.accept_tol = c.method == Method::fd ? 1e-8 : 1e-3;
  if (!(*c.accept_tol > 0.0)) throw ConfigError("--accept-tol must be positive");
  if (!c.corrector_iters) c.corrector_iters = c.method == Method::fd ? 50 : 300;
  if (*c.corrector_iters == 0) throw ConfigError("--corrector-iters must be positive");

  if (!c.fd_n) c.fd_n = p.dim() == 1 ? 1000 : c.n;
  if (*c.fd_n < 2) throw ConfigError("--fd-n must be at least 2");
  if (c.every == 0) throw ConfigError("--every must be positive");
  if (c.command == Command::stability && !c.from.empty() && !std::filesystem::exists(c.from / "branch.csv"))
    throw ConfigError("--from " + c.from.string() + " does not contain a branch.csv");
  if (c.command == Command::table1 && c.problem != Equation::bratu_1d)
    throw ConfigError("table1 reproduces the 1D Bratu comparison only");
  return c;
}

std::string to_json(const RunConfig& c) {
  auto opt = [](const auto& v) -> json { return v ? json(*v) : json(nullptr); };
  json j;
  j["command"] = to_string(c.command);
  j["problem"] = to_string(c.problem);
  j["method"] = to_string(c.method);
  j["n"] = c.n;
  j["nu"] = c.nu;
  j["mu"] = opt(c.mu);
  j["branch"] = to_string(c.branch);
  j["seed"] = opt(c.seed);
  j["mu_start"] = opt(c.mu_start);
  j["mu_min"] = c.mu_min;
  j["mu_max"] = opt(c.mu_max);
  j["delta"] = opt(c.delta);
  j["tau"] = c.tau;
  j["max_steps"] = c.max_steps;
  j["norm"] = norm_name(c.norm);
  j["accept_tol"] = opt(c.accept_tol);
  j["corrector_iters"] = opt(c.corrector_iters);
  j["stability"] = to_string(c.stability);
  j["activation"] = to_string(c.activation);
  j["mask"] = c.mask;
  j["alpha"] = c.weights.alpha;
  j["beta"] = c.weights.beta;
  j["gamma"] = c.weights.gamma;
  j["fd_n"] = opt(c.fd_n);
  j["from"] = c.from.string();
  j["points"] = c.points;
  j["every"] = c.every;
  j["out"] = c.out.string();
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    auto opt = [&]<typename T>(const char* key, std::optional<T>& dst) {
      if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
    };
    RunConfig c;
    c.command = parse_command(j.at("command").get<std::string>());
    c.problem = parse_equation(j.at("problem").get<std::string>());
    c.method = parse_method(j.at("method").get<std::string>());
    c.n = j.at("n").get<std::size_t>();
    c.nu = j.at("nu").get<double>();
    opt("mu", c.mu);
    c.branch = parse_branch(j.at("branch").get<std::string>());
    opt("seed", c.seed);
    opt("mu_start", c.mu_start);
    c.mu_min = j.at("mu_min").get<double>();
    opt("mu_max", c.mu_max);
    opt("delta", c.delta);
    c.tau = j.at("tau").get<double>();
    c.max_steps = j.at("max_steps").get<std::size_t>();
    c.norm = parse_norm(j.at("norm").get<std::string>());
    opt("accept_tol", c.accept_tol);
    opt("corrector_iters", c.corrector_iters);
    c.stability = parse_stability(j.at("stability").get<std::string>());
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.mask = j.at("mask").get<std::string>();
    c.weights = {j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("gamma").get<double>()};
    opt("fd_n", c.fd_n);
    c.from = j.at("from").get<std::string>();
    c.points = j.at("points").get<std::vector<std::size_t>>();
    c.every = j.at("every").get<std::size_t>();
    c.out = j.at("out").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run.json: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("malformed run.json: ") + e.what());
  }
}

}  // namespace branchtrace::cli
