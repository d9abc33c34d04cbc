// End-to-end checks of the command line tool: drives the installed binary
// through a shell, inspects exit codes, JSON bodies, config echoes, and CSV
// determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include <sys/wait.h>

namespace {

std::string cli_path() {
#ifdef COLLAPSE_CLI_PATH
  return COLLAPSE_CLI_PATH;
#else
  const char* p = std::getenv("COLLAPSE_CLI_PATH");
  REQUIRE(p != nullptr);
  return p;
#endif
}

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "collapse_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

int run(const std::string& args, const std::string& log_name = "last.log") {
  const auto log = work_dir() / log_name;
  const std::string cmd =
      '"' + cli_path() + "\" " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json slurp_json(const std::filesystem::path& p) {
  return nlohmann::json::parse(slurp(p));
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TEST_CASE("pillowcase subcommand reports the pinned structure") {
  const auto out = work_dir() / "pillow.json";
  CHECK(run("pillowcase --out " + out.string()) == 0);
  const nlohmann::json j = slurp_json(out);
  CHECK(j.at("config").at("command") == "pillowcase");
  CHECK(j.at("config").at("format") == "json");
  CHECK(j.at("config").at("seed").get<int>() == 1);
  CHECK(j.at("corner_nodes").get<int>() == 4);
  CHECK(j.at("canonical_strata").get<int>() == 5);
  CHECK(j.at("base_strata").get<int>() == 3);
  CHECK(j.at("induced_strata").get<int>() == 7);
  CHECK(j.at("interior_fiber_endpoints").get<int>() == 0);
}

TEST_CASE("quasifinsler subcommand pins the closed form") {
  const auto out = work_dir() / "quasi.json";
  CHECK(run("quasifinsler --lambda 7 --base-n 8 --fiber-n 16 --samples 32 --out " +
            out.string()) == 0);
  const nlohmann::json j = slurp_json(out);
  CHECK(j.at("triangle_gap").get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(j.at("expected_triangle_gap").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("modulus_k_axis_pair").get<double>() == doctest::Approx(1.5));
  CHECK(j.at("modulus_k").get<double>() >= 1.5 - 1e-9);
  CHECK(j.at("modulus_k").get<double>() <= 1.75);
  CHECK(j.at("max_direction_gap").get<double>() <= 1e-6);
  CHECK(j.at("axioms").at("positivity_violations").get<int>() == 0);
  CHECK(j.at("config").at("lambda").get<double>() == 7.0);
}

TEST_CASE("invalid invocations exit with the configuration code") {
  CHECK(run("quasifinsler --lambda 1", "err1.log") == 2);          // needs lambda > 2
  CHECK(run("--format xml pillowcase", "err2.log") == 2);          // unknown format
  CHECK(run("collapse --scenario /does/not/exist.json", "err3.log") == 2);
  CHECK(run("", "err4.log") == 2);                                 // a subcommand is required
  CHECK(run("collapse --scenario x --preset simple", "err5.log") == 2);  // mutually exclusive
  CHECK(run("--help", "help.log") == 0);
}

TEST_CASE("counterexample subcommand tracks the decay schedule") {
  const auto out = work_dir() / "counter.json";
  CHECK(run("counterexample --n 32 --mu 4 16 --out " + out.string()) == 0);
  const nlohmann::json j = slurp_json(out);
  const auto& rows = j.at("rows");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("lambda").get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rows[1].at("lambda").get<double>() == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(rows[1].at("diameter").get<double>() < rows[0].at("diameter").get<double>());
  CHECK(rows[0].at("diameter").get<double>() <= rows[0].at("bound").get<double>() + 1e-12);
}

TEST_CASE("csv output is byte identical across runs") {
  const auto a = work_dir() / "run_a.csv";
  const auto b = work_dir() / "run_b.csv";
  const std::string args = "collapse --preset simple --h " + fmt17(2 * kPi / 16) +
                           " --mu 4 16 --r 1 0.5 --format csv --out ";
  CHECK(run(args + a.string()) == 0);
  CHECK(run(args + b.string()) == 0);
  const std::string ca = slurp(a);
  CHECK(ca == slurp(b));
  CHECK(ca.find("# command=collapse") != std::string::npos);
  CHECK(ca.find("# preset=simple") != std::string::npos);
  CHECK(ca.find("# mu=4,16") != std::string::npos);
  CHECK(ca.find("# verdicts") != std::string::npos);
  CHECK(ca.find("# collapse") != std::string::npos);
}

TEST_CASE("collapse on the shear preset reports failure without crashing") {
  const auto out = work_dir() / "shear.json";
  CHECK(run("collapse --preset counterexample --mu 4 16 --out " + out.string()) == 0);
  const nlohmann::json j = slurp_json(out);
  CHECK_FALSE(j.at("all_pass").get<bool>());
  CHECK_FALSE(j.at("conditions").at("verdicts").at("lambda").at("pass").get<bool>());
  CHECK(j.at("conditions").at("verdicts").at("field_gap").at("pass").get<bool>());
  CHECK(j.at("collapse").at("rows").size() == 2);
}

TEST_CASE("oracle suite passes clean and flags an injected fault") {
  const auto out = work_dir() / "oracles.json";
  CHECK(run("oracles --trials 4 --out " + out.string()) == 0);
  const nlohmann::json j = slurp_json(out);
  CHECK(j.at("all_pass").get<bool>());
  REQUIRE(j.at("rows").size() == 5);
  for (const auto& row : j.at("rows")) CHECK(row.at("pass").get<bool>());

  CHECK(run("oracles --trials 4 --inject-fault", "fault.log") == 1);
  const std::string log = slurp(work_dir() / "fault.log");
  CHECK(log.find("injected fault detected") != std::string::npos);
}

TEST_CASE("scenario files drive the collapse run and yield to cli overrides") {
  const auto scen = work_dir() / "scenario.json";
  {
    nlohmann::json j = {
        {"name", "file-scenario"},
        {"model",
         {{"kind", "torus"}, {"periods", {2 * kPi, 2 * kPi}}, {"h", 2 * kPi / 12}}},
        {"metric", {{"preset", "shrink-fiber"}}},
        {"mu", {4.0, 16.0}},
        {"r", {1.0, 0.5}},
        {"regions",
         nlohmann::json::array({{{"kind", "strip"}, {"center", kPi / 2}, {"halfwidth", 1.0}}})}};
    std::ofstream f(scen);
    f << j.dump(2);
  }
  const auto out = work_dir() / "from_file.json";
  CHECK(run("collapse --scenario " + scen.string() + " --mu 4 --out " + out.string()) == 0);
  const nlohmann::json j = slurp_json(out);
  CHECK(j.at("config").at("scenario_file") == scen.string());
  CHECK(j.at("config").at("scenario") == "file-scenario");
  CHECK(j.at("config").at("mu") == nlohmann::json::array({4.0}));  // cli override wins
  CHECK(j.at("config").at("r") == nlohmann::json::array({1.0, 0.5}));
  CHECK(j.at("all_pass").get<bool>());
}
