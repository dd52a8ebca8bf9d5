#pragma once

// Command-line front end. Every command writes into a run directory: run.json
// (the resolved configuration) plus command-specific CSV/JSON files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "branchtrace/error.hpp"
#include "branchtrace/mlp.hpp"
#include "branchtrace/nnsolve.hpp"
#include "branchtrace/param_system.hpp"
#include "branchtrace/problems.hpp"

namespace branchtrace::cli {

enum class Command { solve, continuation, stability, table1 };
enum class Method { fd, nn };
enum class StabilityMode { none, fold, all };

std::string_view to_string(Command c);
std::string_view to_string(Method m);
std::string_view to_string(StabilityMode m);

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_assertion = 1;
inline constexpr int exit_nonconvergence = 2;
inline constexpr int exit_invalid_config = 3;

struct RunConfig {
  Command command = Command::solve;
  Equation problem = Equation::bratu_1d;
  Method method = Method::nn;
  std::size_t n = 0;  // 0: 100 in 1D, 40 in 2D
  double nu = 0.1;
  std::optional<double> mu;  // solve / stability; a per-problem default otherwise
  Branch branch = Branch::lower;
  std::optional<std::uint64_t> seed;  // falls back to BRANCHTRACE_SEED, then 0

  // continuation
  std::optional<double> mu_start;
  double mu_min = 0.0;
  std::optional<double> mu_max;  // unbounded when empty
  std::optional<double> delta;  // 0.05 Bratu, 0.02 Burgers
  double tau = 1.0;
  std::size_t max_steps = 200;
  BranchNorm norm = BranchNorm::sup;
  std::optional<double> accept_tol;   // corrector; 1e-8 fd, 1e-3 nn
  std::optional<std::size_t> corrector_iters;  // 50 fd, 300 nn
  StabilityMode stability = StabilityMode::none;

  // networks
  Activation activation = Activation::tanh;
  std::string mask = "auto";  // auto, none or a mask name
  NnWeights weights;

  // stability
  std::optional<std::size_t> fd_n;  // 1000 in 1D, n in 2D
  std::filesystem::path from;        // a continuation run directory
  std::vector<std::size_t> points;   // steps whose eigenfunctions are exported
  std::size_t every = 1;

  std::filesystem::path out = "run";
};

/// Parses argv. Returns nullopt after printing help; throws ConfigError.
std::optional<RunConfig> parse_args(int argc, const char* const* argv);

/// Fills every defaulted field and validates the combination.
RunConfig resolve(RunConfig c);

std::string to_json(const RunConfig& c);
RunConfig config_from_json(const std::string& text);

Problem problem_of(const RunConfig& c);
BoundaryMask mask_of(const RunConfig& c);
/// default_network with the configured activation and mask.
Mlp network_of(const RunConfig& c, std::uint64_t seed, Branch branch);

int cmd_solve(const RunConfig& c, std::ostream& log);
int cmd_continue(const RunConfig& c, std::ostream& log);
int cmd_stability(const RunConfig& c, std::ostream& log);
int cmd_table1(const RunConfig& c, std::ostream& log);

/// Parse, resolve, dispatch and map exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace branchtrace::cli
