#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const std::string log = "cli_output_" + std::to_string(counter++) + ".txt";
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += std::string(FRACDEG_BIN_PATH) + " " + args + " > " + log + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  if (raw != -1 && WIFEXITED(raw)) r.code = WEXITSTATUS(raw);
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  fs::remove(log);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path("cli_scratch") / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("help text lists the commands") {
  const RunResult r = run_cli("--help");
  CHECK(r.code == 0);
  for (const char* name : {"harmonic", "solve", "extremal", "exponent",
                           "multiplicity", "stability", "check", "bench"})
    CHECK(r.output.find(name) != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("").code == 1);  // a subcommand is required
  CHECK(run_cli("harmonic --no-such-flag").code == 1);

  const RunResult bad_s = run_cli("harmonic --s 1.2 --n 49");
  CHECK(bad_s.code == 1);
  CHECK(bad_s.output.find("s must lie in (0,1)") != std::string::npos);

  const RunResult bad_n = run_cli("harmonic --s 0.75 --n 2");
  CHECK(bad_n.code == 1);
  CHECK(bad_n.output.find("n must be at least 3") != std::string::npos);

  const RunResult bad_r = run_cli("harmonic --s 0.75 --n 49 --r-trunc 1.0");
  CHECK(bad_r.code == 1);
  CHECK(bad_r.output.find("r_trunc must be at least twice") != std::string::npos);

  const RunResult bad_sigma =
      run_cli("harmonic --s 0.5 --n 49 --datum constant --growth-sigma 1.2");
  CHECK(bad_sigma.code == 1);
  CHECK(bad_sigma.output.find("sigma must satisfy sigma < 2s") !=
        std::string::npos);

  const RunResult bad_cfg = run_cli("harmonic --config does_not_exist.json");
  CHECK(bad_cfg.code == 1);
  CHECK(bad_cfg.output.find("cannot read config file") != std::string::npos);
}

TEST_CASE("harmonic run writes solution, sidecar and manifest") {
  const fs::path d = fresh_dir("harmonic");
  const RunResult r = run_cli("harmonic --s 0.75 --n 99 --datum figure1 "
                              "--output-dir " + d.string());
  CHECK(r.code == 0);
  CHECK(r.output.find("harmonic solve") != std::string::npos);
  REQUIRE(fs::exists(d / "harmonic.csv"));
  REQUIRE(fs::exists(d / "harmonic.json"));
  REQUIRE(fs::exists(d / "manifest.json"));

  const nlohmann::json side = load_json(d / "harmonic.json");
  CHECK(side["kind"] == "harmonic");
  CHECK(side["n"] == 99);
  CHECK(side["s"] == 0.75);

  const nlohmann::json man = load_json(d / "manifest.json");
  CHECK(man["command"] == "harmonic");
  CHECK(man["s"] == 0.75);
  CHECK(man["n"] == 99);
  CHECK(man["datum"] == "figure1");
  CHECK(man["output_dir"] == d.string());

  const std::string csv = slurp(d / "harmonic.csv");
  CHECK(csv.rfind("x,u\n", 0) == 0);
}

TEST_CASE("identical invocations produce identical artifacts") {
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  const std::string args = "harmonic --s 0.6 --n 99 --datum figure1 ";
  CHECK(run_cli(args + "--output-dir " + d1.string()).code == 0);
  CHECK(run_cli(args + "--output-dir " + d2.string()).code == 0);
  CHECK(slurp(d1 / "harmonic.csv") == slurp(d2 / "harmonic.csv"));
  CHECK(slurp(d1 / "harmonic.json") == slurp(d2 / "harmonic.json"));
}

TEST_CASE("degenerate solve converges and reports its residual") {
  const fs::path d = fresh_dir("solve");
  const RunResult r = run_cli(
      "solve --s 0.75 --gamma 1 --n 99 --datum constant --datum-value 0 "
      "--forcing constant --forcing-value 1 --output-dir " + d.string());
  CHECK(r.code == 0);
  CHECK(r.output.find("converged = yes") != std::string::npos);
  REQUIRE(fs::exists(d / "solution.json"));
  const nlohmann::json side = load_json(d / "solution.json");
  CHECK(side["kind"] == "degenerate");
  CHECK(side["final_eps"].get<double>() > 0.0);
}

TEST_CASE("a starved iteration budget exits with the no-convergence code") {
  const fs::path d = fresh_dir("noconv");
  const RunResult r = run_cli(
      "solve --s 0.75 --gamma 2 --n 49 --datum constant --datum-value 0 "
      "--forcing constant --forcing-value 1 --picard-max 2 "
      "--residual-tol 1e-14 --eps-schedule 0.01 1e-9 --output-dir " +
      d.string());
  CHECK(r.code == 2);
  CHECK(r.output.find("converged = no") != std::string::npos);
}

TEST_CASE("tabulated forcing is interpolated onto the grid") {
  const fs::path d = fresh_dir("table");
  const fs::path tab = d / "forcing.csv";
  {
    std::ofstream f(tab);
    f << "x,f\n-2,1.0\n2,1.0\n";
  }
  const RunResult r = run_cli(
      "harmonic --s 0.75 --n 49 --datum constant --datum-value 0 "
      "--forcing table --forcing-table " + tab.string() +
      " --output-dir " + d.string());
  CHECK(r.code == 0);
  REQUIRE(fs::exists(d / "harmonic.json"));
}

TEST_CASE("extremal run names its artifacts after the side") {
  const fs::path d = fresh_dir("extremal");
  const RunResult r = run_cli(
      "extremal --side minimal --s 0.75 --n 99 --datum constant "
      "--datum-value 1 --output-dir " + d.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(d / "minimal.csv"));
  CHECK(fs::exists(d / "minimal.json"));
  CHECK(load_json(d / "minimal.json")["kind"] == "minimal");

  CHECK(run_cli("extremal --side sideways --s 0.75 --n 49").code == 1);
}

TEST_CASE("multiplicity experiment writes the case report") {
  const fs::path d = fresh_dir("mult");
  const RunResult r = run_cli(
      "multiplicity --case linear_unique --s 0.75 --gamma 1 --n 199 "
      "--output-dir " + d.string());
  CHECK(r.code == 0);
  REQUIRE(fs::exists(d / "linear_unique_report.json"));
  const nlohmann::json rep = load_json(d / "linear_unique_report.json");
  CHECK(rep["case_id"] == "linear_unique");
  for (const auto& a : rep["assertions"]) CHECK(a["pass"].get<bool>());
  for (const auto& c : rep["candidates"])
    CHECK(fs::exists(c["file"].get<std::string>()));

  CHECK(run_cli("multiplicity --case bogus --n 49 --s 0.75").code == 1);
}

TEST_CASE("stability run reports one distance per perturbation") {
  const fs::path d = fresh_dir("stab");
  const RunResult r = run_cli(
      "stability --k-list 1,2 --s 0.75 --gamma 1 --n 49 --output-dir " +
      d.string());
  CHECK((r.code == 0 || r.code == 4));
  REQUIRE(fs::exists(d / "stability_report.json"));
  const nlohmann::json rep = load_json(d / "stability_report.json");
  REQUIRE(rep["distances"].is_array());
  CHECK(rep["distances"].size() == 2);
  CHECK(rep.contains("final_distance"));
  CHECK(rep.contains("decreasing"));
}

TEST_CASE("unknown check suite is a usage error") {
  CHECK(run_cli("check --suite nonsense --n 49 --s 0.75").code == 1);
}

TEST_CASE("benchmark writes a csv and prints speedups") {
  const fs::path d = fresh_dir("bench");
  const RunResult r = run_cli(
      "bench --bench-ns 128,256 --bench-reps 1 --s 0.75 --output-dir " +
      d.string());
  CHECK(r.code == 0);
  CHECK(r.output.find("speedup") != std::string::npos);
  REQUIRE(fs::exists(d / "bench.csv"));
  const std::string csv = slurp(d / "bench.csv");
  CHECK(csv.find("128") != std::string::npos);
  CHECK(csv.find("256") != std::string::npos);
}

TEST_CASE("exponent smoke run produces a parsable report") {
  const fs::path d = fresh_dir("exponent");
  const RunResult r = run_cli(
      "exponent --s 0.75 --gamma 1 --n 499 --n-probe 1000 --fit-r0 0.4 "
      "--fit-ratio 0.7 --fit-count 8 --output-dir " + d.string());
  // The coarse grid need not hit the 5% target; only usage errors are fatal.
  CHECK((r.code == 0 || r.code == 4));
  REQUIRE(fs::exists(d / "exponent_report.json"));
  const nlohmann::json rep = load_json(d / "exponent_report.json");
  CHECK(rep["beta"] == 1.25);
  CHECK(rep.contains("alpha_hat"));
  CHECK(rep.contains("alpha_formula"));
  CHECK(rep["converged"].get<bool>());
}

TEST_CASE("config file seeds the options and flags override it") {
  const fs::path d = fresh_dir("config");
  const fs::path cfg = d / "config.json";
  {
    std::ofstream f(cfg);
    f << R"({"s": 0.6, "n": 49, "datum": "constant", "datum_value": 2.0})";
  }
  const RunResult r = run_cli("harmonic --config " + cfg.string() +
                              " --n 99 --output-dir " + d.string());
  CHECK(r.code == 0);
  const nlohmann::json man = load_json(d / "manifest.json");
  CHECK(man["s"] == 0.6);        // from the config file
  CHECK(man["n"] == 99);         // flag wins over the file
  CHECK(man["datum"] == "constant");
  CHECK(man["datum_value"] == 2.0);
}

TEST_CASE("worker override is accepted") {
  const fs::path d = fresh_dir("threads");
  const RunResult r = run_cli("harmonic --s 0.75 --n 49 --datum figure1 "
                              "--output-dir " + d.string(),
                              "FRACDEG_THREADS=2");
  CHECK(r.code == 0);
}
