#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "branchtrace/cli.hpp"
#include "branchtrace/io.hpp"

using namespace branchtrace;
using namespace branchtrace::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "branchtrace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

RunConfig parsed(std::vector<std::string> args) {
  args.insert(args.begin(), "branchtrace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return resolve(parse_args(static_cast<int>(argv.size()), argv.data()).value());
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("branchtrace_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("defaults are resolved") {
    const RunConfig s = parsed({"solve"});
    CHECK(s.problem == Equation::bratu_1d);
    CHECK(s.method == Method::nn);
    CHECK(s.n == 100);
    CHECK(s.mu.value() == 1.0);
    CHECK(s.seed.has_value());

    const RunConfig c = parsed({"continue", "--problem", "bratu2d", "--method", "fd"});
    CHECK(c.n == 40);
    CHECK(c.delta.value() == 0.05);
    CHECK(c.accept_tol.value() == 1e-8);
    CHECK(c.corrector_iters.value() == 50);
    CHECK(c.mu_start.value() == 0.1);

    const RunConfig b = parsed({"continue", "--problem", "burgers-mixed"});
    CHECK(b.delta.value() == 0.02);
    CHECK(b.mu_start.value() == 0.01);
    CHECK(b.accept_tol.value() == 1e-3);

    const RunConfig st = parsed({"stability", "--C", "2"});
    CHECK(st.mu.value() == 2.0);
    CHECK(st.fd_n.value() == 1000);
  }

  TEST_CASE("parameter aliases") {
    CHECK(parsed({"solve", "--phi", "0.05", "--problem", "burgers-mixed"}).mu.value() == 0.05);
    CHECK(parsed({"solve", "--rho", "0.7", "--problem", "burgers-dirichlet"}).mu.value() == 0.7);
  }

  TEST_CASE("invalid combinations are rejected") {
    CHECK_THROWS_AS(parsed({"solve", "--problem", "burgers-mixed", "--mask", "sin_pi_x"}), ConfigError);
    CHECK_THROWS_AS(parsed({"solve", "--problem", "bratu2d", "--mask", "sin_pi_x"}), ConfigError);
    CHECK_THROWS_AS(parsed({"solve", "--problem", "burgers-dirichlet", "--branch", "upper"}), ConfigError);
    CHECK_THROWS_AS(parsed({"solve", "--problem", "heat"}), ConfigError);
    CHECK_THROWS_AS(parsed({"solve", "--nu", "-1"}), ConfigError);
    CHECK_THROWS_AS(parsed({"continue", "--tau", "2"}), ConfigError);
    CHECK_THROWS_AS(parsed({"continue", "--delta", "0"}), ConfigError);
    CHECK_THROWS_AS(parsed({"table1", "--problem", "bratu2d"}), ConfigError);
    CHECK_THROWS_AS(parsed({"stability", "--from", "/nonexistent/run"}), ConfigError);
    CHECK_THROWS_AS(parsed({"solve", "--bogus"}), ConfigError);
  }

  TEST_CASE("run.json round trip") {
    const RunConfig c = parsed({"continue", "--problem", "burgers-mixed", "--nu", "0.2", "--seed", "5", "--norm", "l2"});
    const RunConfig back = resolve(config_from_json(to_json(c)));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.seed.value() == 5);
    CHECK(back.norm == BranchNorm::l2);
  }

  TEST_CASE("exit code for invalid configuration") {
    const auto o = invoke({"solve", "--problem", "burgers-mixed", "--mask", "sin_pi_x", "--out", scratch("bad").string()});
    CHECK(o.code == exit_invalid_config);
    CHECK_FALSE(o.err.empty());
  }

  TEST_CASE("exit code for a solver failure") {
    const auto dir = scratch("nonconv");
    const auto o = invoke({"solve", "--method", "fd", "--C", "4", "--out", dir.string()});
    CHECK(o.code == exit_nonconvergence);
  }

  TEST_CASE("FD solve at zero load is exactly zero") {
    const auto dir = scratch("zero");
    const auto o = invoke({"solve", "--problem", "bratu1d", "--method", "fd", "--C", "0", "--n", "10", "--out", dir.string()});
    REQUIRE(o.code == exit_ok);
    CHECK(fs::exists(dir / "run.json"));
    const auto t = read_csv(dir / "solution.csv");
    CHECK(t.rows.size() == 11);
    for (const auto& r : t.rows) CHECK(std::stod(r[t.column("u_fd")]) == 0.0);
  }

  TEST_CASE("NN solve prints a small MSE and is deterministic") {
    const auto a = scratch("nn_a"), b = scratch("nn_b");
    const std::vector<std::string> args{"solve", "--problem", "bratu1d", "--method", "nn", "--C", "1", "--branch", "lower",
                                        "--n", "100", "--seed", "7", "--out"};
    auto args_a = args, args_b = args;
    args_a.push_back(a.string());
    args_b.push_back(b.string());
    const auto oa = invoke(args_a);
    const auto ob = invoke(args_b);
    REQUIRE(oa.code == exit_ok);
    REQUIRE(ob.code == exit_ok);
    const auto pos = oa.out.find("mse ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(oa.out.substr(pos + 4)) <= 1e-10);
    CHECK(read_text(a / "solution.csv") == read_text(b / "solution.csv"));
    CHECK(read_text(a / "weights.json") == read_text(b / "weights.json"));
    CHECK(fs::exists(a / "result.json"));
  }

  TEST_CASE("continuation writes the fold and branch files") {
    const auto dir = scratch("cont");
    const auto o = invoke({"continue", "--problem", "bratu1d", "--method", "fd", "--max-steps", "100", "--stability",
                           "fold", "--out", dir.string()});
    REQUIRE(o.code == exit_ok);
    const auto branch = read_csv(dir / "branch.csv");
    CHECK(branch.rows.size() == 100);
    const std::string fold = read_text(dir / "fold.json");
    CHECK(fold.find("mu_star") != std::string::npos);
    CHECK(fold.find("lambda_at_fold") != std::string::npos);
    CHECK(fs::exists(dir / "checkpoints"));
    CHECK(fs::exists(dir / "reference.csv"));

    // Annotating the finished run from its checkpoints.
    const auto st = scratch("stab_from");
    const auto s = invoke({"stability", "--from", dir.string(), "--method", "fd", "--every", "25", "--n", "100", "--fd-n",
                           "100", "--out", st.string()});
    CHECK(s.code == exit_ok);
    const auto table = read_csv(st / "stability.csv");
    CHECK(table.rows.size() == 4);
    CHECK_FALSE(table.rows[0][table.column("lambda_fd")].empty());
  }
}
