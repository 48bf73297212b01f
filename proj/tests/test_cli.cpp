#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tdks/errors.hpp"
#include "tdks/runner.hpp"

using namespace tdks;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tdks_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmall = R"(grid: {dim: 1, points: 64, length: 8.0}
potential:
  external: {family: harmonic}
  hartree: {coupling: 0.8, radius: 0.5}
initial_state:
  orbitals:
    - {center: [4.0], width: 1.0, momentum: [0.5]}
time: {T: 0.2, dt: 0.02}
solver: all
mode: empirical
tolerances: {picard: 1.0e-12}
newton: {alpha: 0.1, delta: 1.0}
empirical_pairs: 4
audit_samples: 8
plots: false
seed: 99
)";

}  // namespace

TEST_CASE("parse errors carry file, line and column") {
  try {
    parse_config("grid: {dim: 1, points: 64, length: 8.0}\npotential:\n  external: {family: morse}\n", "bad.yaml");
    FAIL("expected a configuration error");
  } catch (const configuration_error& e) {
    CHECK(std::string(e.what()).rfind("bad.yaml:3:", 0) == 0);
    CHECK(std::string(e.what()).find("family") != std::string::npos);
  }
  try {
    parse_config("grid: {dim: 1}\ncolour: blue\n", "x.yaml");
    FAIL("expected a configuration error");
  } catch (const configuration_error& e) {
    CHECK(std::string(e.what()).rfind("x.yaml:2:", 0) == 0);
    CHECK(std::string(e.what()).find("colour") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("grid: [1, 2\n"), configuration_error);
  CHECK_THROWS_AS(parse_config("time: {T: 1.0, dt: 0.3}\n"), configuration_error);
  CHECK_THROWS_AS(parse_config("solver: gradient\n"), configuration_error);
}

TEST_CASE("config defaults, hash and overrides") {
  const auto cfg = parse_config(kSmall, "small.yaml");
  CHECK(cfg.points == 64);
  CHECK(cfg.steps() == 10);
  CHECK(cfg.tol.linearized == 1e-14);
  CHECK(cfg.newton.alpha == 0.1);
  CHECK(cfg.seed == 99);
  CHECK(cfg.config_hash == fnv1a_hex(kSmall));
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  RunConfig o = cfg;
  RunOverrides ov;
  ov.seed = 7;
  ov.mode = "analytic";
  ov.solver = "picard";
  ov.output_dir = "elsewhere";
  apply_overrides(o, ov);
  CHECK(o.seed == 7);
  CHECK(o.mode == "analytic");
  CHECK(o.solver == "picard");
  CHECK(o.output_dir == "elsewhere");
  CHECK(o.initial_state().n_orbitals() == 1);
}

TEST_CASE("runs are deterministic for a fixed seed") {
  auto cfg = parse_config(kSmall, "small.yaml");
  const auto a = scratch("det_a"), b = scratch("det_b");
  std::ostringstream out, err;
  cfg.output_dir = a.string();
  REQUIRE(run_command(cfg, out, err) == 0);
  cfg.output_dir = b.string();
  REQUIRE(run_command(cfg, out, err) == 0);
  for (const char* f : {"trace_picard.csv", "trace_newton.csv", "trace_approx_newton.csv"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto ja = nlohmann::json::parse(slurp(a / "report.json"));
  const auto jb = nlohmann::json::parse(slurp(b / "report.json"));
  CHECK(ja["constants"] == jb["constants"]);
  CHECK(ja["status"] == "ok");
  for (const auto& pair : ja["agreement"]) CHECK(pair["pass"].get<bool>());
}

TEST_CASE("decoupled report: zero gamma and a single Picard evaluation") {
  auto cfg = load_config(std::string(TDKS_SOURCE_DIR) + "/configs/decoupled.yaml");
  const auto dir = scratch("decoupled");
  cfg.output_dir = dir.string();
  cfg.solver = "picard";
  std::ostringstream out, err;
  REQUIRE(run_command(cfg, out, err) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["constants"]["analytic"]["gamma_t"].get<double>() == 0.0);
  CHECK(j["solvers"]["picard"]["windows"][0]["iterations"].get<int>() == 1);
  CHECK(fs::exists(dir / "residuals.svg"));
  CHECK(fs::exists(dir / "energy.svg"));
}

TEST_CASE("verify on a coarse time step fails and names the failing identity") {
  auto cfg = load_config(std::string(TDKS_TEST_DATA) + "/coarse_dt.yaml");
  cfg.output_dir = scratch("coarse").string();
  cfg.plots = false;
  std::ostringstream out, err;
  CHECK(verify_command(cfg, out, err) != 0);
  CHECK(err.str().find("FAIL energy_identity") != std::string::npos);
  CHECK(out.str().find("PASS unitarity") != std::string::npos);
}

TEST_CASE("approximate Newton is refused when the derivative bound reaches one") {
  auto cfg = load_config(std::string(TDKS_TEST_DATA) + "/strong_coupling.yaml");
  const auto dir = scratch("strong");
  cfg.output_dir = dir.string();
  cfg.solver = "approx_newton";
  cfg.plots = false;
  std::ostringstream out, err;
  CHECK(run_command(cfg, out, err) == 1);
  CHECK(err.str().find("approx_newton") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["status"] == "failed");
  CHECK_FALSE(j["solvers"]["approx_newton"]["converged"].get<bool>());
}
