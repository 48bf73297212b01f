// Command-line front end: run | verify | constants <config.yaml>.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tdks/errors.hpp"
#include "tdks/runner.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

void configure_threads() {
  const char* env = std::getenv("TDKS_NUM_THREADS");
  if (!env) return;
  const int n = std::atoi(env);
  if (n < 1) {
    std::cerr << "warning: ignoring TDKS_NUM_THREADS=" << env << '\n';
    return;
  }
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kohn-Sham fixed-point, Newton and approximate-Newton solver"};
  app.require_subcommand(1);
  tdks::RunOverrides overrides;
  std::string config_path;
  std::string mode, solver, output_dir;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "directory for report, traces and plots");
    sub->add_option("--seed", seed, "seed for all sampled quantities");
    sub->add_option("--mode", mode, "constants mode")->check(CLI::IsMember({"analytic", "empirical"}));
    sub->add_option("--solver", solver, "solver selection")
        ->check(CLI::IsMember({"picard", "newton", "approx_newton", "all"}));
  };
  CLI::App* run = app.add_subcommand("run", "run the selected solvers and write the report");
  CLI::App* verify = app.add_subcommand("verify", "run the diagnostics suite; exit 0 iff all checks pass");
  CLI::App* constants = app.add_subcommand("constants", "print the constants ledger");
  add_common(run);
  add_common(verify);
  add_common(constants);

  CLI11_PARSE(app, argc, argv);
  configure_threads();

  for (CLI::App* sub : {run, verify, constants}) {
    if (!sub->parsed()) continue;
    if (sub->count("--output-dir")) overrides.output_dir = output_dir;
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--mode")) overrides.mode = mode;
    if (sub->count("--solver")) overrides.solver = solver;
  }

  tdks::RunConfig cfg;
  try {
    cfg = tdks::load_config(config_path);
    tdks::apply_overrides(cfg, overrides);
  } catch (const tdks::configuration_error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    if (run->parsed()) return tdks::run_command(cfg, std::cout, std::cerr);
    if (verify->parsed()) return tdks::verify_command(cfg, std::cout, std::cerr);
    return tdks::constants_command(cfg, std::cout, std::cerr);
  } catch (const tdks::configuration_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
