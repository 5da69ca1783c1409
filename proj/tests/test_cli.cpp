#include "rsm/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

using namespace rsm;
namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  const fs::path dir = fs::path(RSMCERT_TEST_DIR) / "cli";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(RSMCERT_CLI) + " " + args + " > " + (workdir() / "last.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_output() { return read_file(workdir() / "last.txt"); }

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = workdir() / name;
  write_file_atomic(p, text);
  return p;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("malformed config names the key and exits 1") {
  const auto cfg = write_config("bad.cfg", "benchmark = 2d-system\nlernin_rate = 0.1\n");
  CHECK(run("verify --config " + cfg.string()) == 1);
  CHECK(last_output().find("lernin_rate") != std::string::npos);
}

TEST_CASE("unknown subcommand is an error") { CHECK(run("frobnicate") != 0); }

TEST_CASE("short timeout exits with the timeout code and keeps the log") {
  const fs::path out = workdir() / "timeout";
  fs::remove_all(out);
  const auto cfg = write_config("pend.cfg", "benchmark = inverted-pendulum\nepochs = 50\n");
  CHECK(run("verify --config " + cfg.string() + " --timeout 1 --seed 4 --out " + out.string()) == 2);
  const fs::path log = out / "verdict_inverted-pendulum_seed4.log";
  REQUIRE(fs::exists(log));
  CHECK(read_file(log).find("outcome=timeout") != std::string::npos);
  const std::string summary = read_file(out / "summary_inverted-pendulum_seed4.csv");
  CHECK(summary.rfind("benchmark,seed,outcome,iterations,mesh,runtime_s\n", 0) == 0);
}

TEST_CASE("zero-noise trajectories are reproducible") {
  const auto cfg = write_config("traj.cfg", "benchmark = inverted-pendulum\nzero_noise = true\nsim_trajectories = 3\n");
  const fs::path a = workdir() / "traj_a", b = workdir() / "traj_b";
  REQUIRE(run("simulate-trajectories --config " + cfg.string() + " --seed 5 --out " + a.string()) == 0);
  REQUIRE(run("simulate-trajectories --config " + cfg.string() + " --seed 5 --out " + b.string()) == 0);
  const std::string fa = read_file(a / "trajectories_inverted-pendulum_seed5.csv");
  CHECK(fa == read_file(b / "trajectories_inverted-pendulum_seed5.csv"));
  // header plus 3 runs of 201 states
  CHECK(count_lines(fa) == 1 + 3 * 201);
}

TEST_CASE("bound experiment and simulation with a certificate") {
  const fs::path out = workdir() / "exp";
  fs::remove_all(out);
  // stand-in certificate: V(x) = |x1| + |x2|
  Mat w1(4, 2);
  w1 << 1, 0, -1, 0, 0, 1, 0, -1;
  Certificate c;
  c.network = Mlp({Layer{w1, Vec::Zero(4)}, Layer{Mat::Ones(1, 4), Vec::Zero(1)}});
  c.epsilon = 0.01;
  c.lipschitz_v = lipschitz_l1(c.network);
  c.benchmark = "2d-system";
  const fs::path cert = workdir() / "cert.json";
  save_certificate(cert, c);
  const auto cfg = write_config("exp.cfg", "benchmark = 2d-system\ncertificate = " + cert.string() +
                                               "\nsim_runs = 50\nbound_states = 10\n");
  REQUIRE(run("bound-experiment --config " + cfg.string() + " --seed 2 --out " + out.string()) == 0);
  const std::string rows = read_file(out / "bound_experiment_2d-system_seed2.csv");
  CHECK(count_lines(rows) == 1 + 10 * 5);
  CHECK(rows.rfind("state_index,x1,x2,k,bound,mc_estimate,mc_std\n", 0) == 0);

  REQUIRE(run("simulate --config " + cfg.string() + " --seed 2 --out " + out.string()) == 0);
  CHECK(count_lines(read_file(out / "contour_2d-system_seed2.csv")) == 1 + 101 * 101);
  CHECK(count_lines(read_file(out / "hitting_times_2d-system_seed2.csv")) == 1 + 50);
  CHECK(count_lines(read_file(out / "tail_2d-system_seed2.csv")) == 1 + 4);

  const fs::path again = workdir() / "exp_again";
  const auto cfg2 = write_config("exp2.cfg", read_file(cfg));
  REQUIRE(run("simulate --config " + cfg2.string() + " --seed 2 --out " + again.string()) == 0);
  for (const char* f : {"contour_2d-system_seed2.csv", "hitting_times_2d-system_seed2.csv", "tail_2d-system_seed2.csv",
                        "trajectories_2d-system_seed2.csv"}) {
    CHECK(read_file(out / f) == read_file(again / f));
  }
}

TEST_CASE("bound experiment without a certificate fails") {
  const auto cfg = write_config("nocert.cfg", "benchmark = 2d-system\ncertificate = /nonexistent/cert.json\n");
  CHECK(run("bound-experiment --config " + cfg.string()) == 1);
}
