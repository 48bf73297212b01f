#include "tdks/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include <fftw3.h>
#include <json.hpp>

#include "tdks/errors.hpp"
#include "tdks/svg_plot.hpp"

namespace tdks {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSafety = 1.2;

json bundle_json(const ConstantsBundle& b) {
  json j;
  j["mode"] = b.mode;
  j["embedding"] = {{"E1", b.embedding.E1}, {"E2", b.embedding.E2}, {"E3", b.embedding.E3}};
  j["window_length"] = b.window_length;
  j["dt"] = b.dt;
  j["psi0_h10"] = b.psi0_h10;
  j["psi0_l2"] = b.psi0_l2;
  j["hartree_kernel"] = {{"l1", b.hartree_l1}, {"l2", b.hartree_l2}, {"grad_l1", b.hartree_grad_l1}};
  j["lemma_hartree"] = b.lemma_hartree;
  j["xc_increment"] = b.xc_increment;
  j["C0"] = b.C0;
  j["C0_displayed"] = b.C0_displayed;
  j["C"] = b.C;
  j["energy0"] = b.energy0;
  j["sup_dvdt"] = b.sup_dvdt;
  j["r0"] = b.r0;
  j["r"] = b.r;
  j["potential_gradient_bound"] = b.potential_gradient_bound;
  j["step_growth"] = b.step_growth;
  j["U_bound"] = b.U_bound;
  j["gamma_t"] = b.gamma_t;
  j["q"] = b.q;
  if (b.mode == "empirical") j["gamma_measured"] = b.gamma_measured;
  j["notes"] = b.notes;
  return j;
}

json setup_json(const SolverSetup& s) {
  json j;
  j["mode"] = s.mode;
  j["c_lip"] = s.c_lip;
  j["K0"] = s.K0;
  j["inverse_norm"] = s.inverse_norm;
  j["kappa"] = s.kappa;
  j["sigma"] = s.sigma;
  j["M"] = s.M;
  j["sigma_approx"] = s.sigma_approx;
  j["delta"] = s.delta;
  j["q"] = s.q;
  return j;
}

json check_json(const CheckResult& c) {
  return json{{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}, {"margin", c.margin()}};
}

CheckResult make_check(std::string name, double lhs, double rhs) {
  CheckResult c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.pass = lhs <= rhs;
  return c;
}

double max_unitarity_drift(const Trajectory& traj) {
  double drift = 0.0;
  const auto& v0 = traj.front().values();
  for (const auto& s : traj.states())
    for (Eigen::Index j = 0; j < s.values().cols(); ++j)
      drift = std::max(drift, std::abs(s.values().col(j).norm() / v0.col(j).norm() - 1.0));
  return drift;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string trace_file(const std::string& solver, int window, int windows) {
  return windows > 1 ? "trace_" + solver + "_w" + std::to_string(window + 1) + ".csv" : "trace_" + solver + ".csv";
}

double solver_tolerance(const RunConfig& cfg, const std::string& solver) {
  return solver == "picard" ? cfg.tol.picard : 10.0 * cfg.tol.linearized;
}

std::vector<std::string> selected_solvers(const std::string& s) {
  if (s == "all") return {"picard", "newton", "approx_newton"};
  return {s};
}

json versions_json() {
  return json{{"tdks", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"fftw", std::string(fftw_version)}};
}

json header_json(const RunConfig& cfg) {
  json j;
  j["tool"] = "tdks";
  j["versions"] = versions_json();
  j["config"] = {{"source", fs::path(cfg.source_name).filename().string()}, {"hash", cfg.config_hash}};
  j["seed"] = cfg.seed;
  j["mode"] = cfg.mode;
  j["solver"] = cfg.solver;
  const Grid g = cfg.grid();
  j["grid"] = {{"dim", cfg.dim}, {"points", cfg.points}, {"length", cfg.length}, {"spacing", g.spacing()}};
  j["physics"] = {{"hbar", cfg.hbar}, {"mass", cfg.mass}};
  j["time"] = {{"T", cfg.T}, {"dt", cfg.dt}, {"steps", cfg.steps()}};
  return j;
}

json constants_ledger(const Experiment& ex, const FixedPointMap& map) {
  json j;
  for (const char* mode : {"analytic", "empirical"}) {
    try {
      j[mode] = bundle_json(ex.constants(map, mode));
    } catch (const std::exception& e) {
      j[mode] = json{{"mode", mode}, {"error", e.what()}};
    }
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw structural_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void apply_overrides(RunConfig& cfg, const RunOverrides& o) {
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) {
    if (*o.mode != "analytic" && *o.mode != "empirical")
      throw configuration_error("--mode must be analytic or empirical");
    cfg.mode = *o.mode;
  }
  if (o.solver) {
    if (*o.solver != "picard" && *o.solver != "newton" && *o.solver != "approx_newton" && *o.solver != "all")
      throw configuration_error("--solver must be picard, newton, approx_newton or all");
    cfg.solver = *o.solver;
  }
}

bool DiagnosticsReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

Experiment::Experiment(RunConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  model_ = std::make_unique<PotentialModel>(cfg_.model());
  psi0_ = cfg_.initial_state();
  PropagatorConfig pc;
  pc.linear_solve_tol = cfg_.tol.linear_solve;
  propagator_ = std::make_unique<Propagator>(Propagator::for_model(*model_, pc));
}

FixedPointMap Experiment::first_window(int windows) const {
  if (windows < 1 || cfg_.steps() % windows != 0) throw configuration_error("window count must divide the step count");
  return FixedPointMap(*model_, *propagator_, psi0_, uniform_knots(0.0, cfg_.T / windows, cfg_.steps() / windows));
}

const EmbeddingConstants& Experiment::embedding() const {
  if (!embedding_) embedding_ = embedding_constants(model_->grid(), cfg_.seed);
  return *embedding_;
}

ConstantsBundle Experiment::constants(const FixedPointMap& map, const std::string& mode) const {
  if (mode == "analytic") return analytic_constants(map, embedding());
  if (mode == "empirical") {
    EmpiricalOptions opts;
    opts.seed = cfg_.seed;
    opts.pairs = cfg_.empirical_pairs;
    opts.safety = kSafety;
    return empirical_constants(map, embedding(), opts);
  }
  throw configuration_error("unknown constants mode '" + mode + "'");
}

SolverSetup Experiment::setup(const FixedPointMap& map, const ConstantsBundle& b) const {
  SolverSetup s;
  s.mode = b.mode;
  s.delta = cfg_.newton.delta > 0.0 ? std::min(cfg_.newton.delta, b.r) : b.r;
  if (b.mode == "analytic") {
    s.c_lip = analytic_derivative_lipschitz(b);
    s.K0 = kprime_norm_bound(b, b.window_length, b.r);
    if (s.K0 < 1.0)
      s.inverse_norm = 1.0 / (1.0 - s.K0);
    else if (b.q < 1.0)
      s.inverse_norm = 1.0 / (1.0 - b.q);
    else
      throw window_too_long("no certified bound on (I - K')^{-1} on this window; shrink the window");
    s.q = b.q;
  } else {
    Rng rng(cfg_.seed ^ 0x9E3779B97F4A7C15ULL);
    const Trajectory centre = map(map.zero_charge());
    const Linearization lin(map, centre);
    s.K0 = kSafety * estimate_kprime_norm(lin, 3, rng);
    s.inverse_norm = kSafety * estimate_inverse_norm(lin, 3, rng, cfg_.tol.linearized);
    s.c_lip = kSafety * estimate_derivative_lipschitz(map, s.delta, 6, rng, centre);
    s.q = b.q < 1.0 ? b.q : s.K0;
  }
  const auto& n = cfg_.newton;
  const KappaSigma ks = newton_constants(s.c_lip, n.tau, n.alpha, n.h, s.inverse_norm);
  s.kappa = ks.kappa;
  s.sigma = ks.sigma;
  if (s.K0 < 1.0) {
    s.M = neumann_M(s.K0, s.c_lip);
    s.sigma_approx = approx_newton_sigma(s.M, n.h, n.alpha, s.delta);
  } else {
    s.M = kNaN;
    s.sigma_approx = kNaN;
  }
  return s;
}

SolveOutcome Experiment::solve(const FixedPointMap& map, const std::string& solver, const std::string& mode) const {
  SolveOutcome o;
  o.solver = solver;
  const ConstantsBundle b = constants(map, mode);
  PicardOptions po;
  po.q = b.q < 1.0 ? b.q : 0.0;
  if (solver == "picard") {
    po.target_residual = cfg_.tol.picard;
    PicardResult r = picard_solve(map, po);
    o.solution = std::move(r.solution);
    o.trace = std::move(r.trace);
    o.predicted_iterations = r.predicted_iterations;
    return o;
  }
  if (solver != "newton" && solver != "approx_newton") throw configuration_error("unknown solver '" + solver + "'");
  const SolverSetup s = setup(map, b);
  NewtonParams np;
  np.h = cfg_.newton.h;
  np.alpha = cfg_.newton.alpha;
  np.tau = cfg_.newton.tau;
  np.kappa = s.kappa;
  np.sigma = s.sigma;
  np.max_newton_iters = cfg_.newton.max_iters;
  np.linearized_tol = cfg_.tol.linearized;
  np.delta = s.delta;
  np.q = s.q;
  if (solver == "approx_newton") {
    if (!std::isfinite(s.M))
      throw window_too_long("approximate Newton refused: the truncated Neumann series needs ||K'|| < 1 near the "
                            "solution, but K0 = " + std::to_string(s.K0) + " on this window");
    np.sigma = s.sigma_approx;
  }
  // Handoff: Picard until the residual is inside Newton's consistency region.
  double target = np.sigma > 0.0 ? 1.0 / np.sigma : std::numeric_limits<double>::max();
  if (np.q > 0.0 && np.q < 1.0) target = std::min(target, np.alpha * np.delta * (1.0 - np.q));
  po.target_residual = target;
  PicardResult pre = picard_solve(map, po);
  o.handoff = pre.trace;
  if (solver == "newton") {
    NewtonResult r = newton_solve(map, pre.solution, np);
    o.solution = std::move(r.solution);
    o.trace = std::move(r.trace);
    o.error_bound = r.error_bound;
  } else {
    NeumannPolicy pol;
    pol.K0 = s.K0;
    pol.M = s.M;
    pol.n_max = cfg_.newton.n_max;
    pol.fixed_n = cfg_.newton.fixed_n;
    ApproxNewtonResult r = approx_newton_solve(map, pre.solution, pol, np, cfg_.seed);
    o.solution = std::move(r.solution);
    o.trace = std::move(r.trace);
    o.error_bound = r.error_bound;
  }
  return o;
}

int Experiment::resolve_windows(const std::string& mode) const {
  if (cfg_.windows > 0) return cfg_.windows;
  // The first window is the worst case: later windows carry the history.
  const int steps = cfg_.steps();
  for (int w = 1; w <= steps; ++w) {
    if (steps % w != 0) continue;
    try {
      const FixedPointMap map = first_window(w);
      if (constants(map, mode).gamma_t <= cfg_.gamma_cap) return w;
    } catch (const window_too_long&) {
    }
  }
  throw window_too_long("no window partition of the step count meets the gamma cap");
}

HorizonOutcome Experiment::solve_horizon(const std::string& solver, const std::string& mode, int windows) const {
  HorizonOutcome h;
  h.windows = windows;
  const WindowSolver ws = [&](const FixedPointMap& map) {
    SolveOutcome o = solve(map, solver, mode);
    auto result = std::make_pair(o.solution, o.trace);
    h.per_window.push_back(std::move(o));
    return result;
  };
  ContinuationResult c = continue_in_time(psi0_, *model_, *propagator_, 0.0, cfg_.T, cfg_.steps(), windows, ws);
  h.solution = std::move(c.solution);
  return h;
}

DiagnosticsReport Experiment::diagnostics(const FixedPointMap& map, const Trajectory& solution) const {
  DiagnosticsReport d;
  const PotentialModel& model = *model_;
  const Grid& grid = model.grid();
  const int N = psi0_.n_orbitals();
  const Trajectory image = map(solution);

  d.checks.push_back(make_check("unitarity", max_unitarity_drift(image), cfg_.tol.unitarity));

  const auto residual = energy_identity_residual(image, model, map.phi_carry());
  d.checks.push_back(make_check("energy_identity", max_abs(residual), cfg_.tol.energy));
  const DensityPath path = map.density_path(image);
  const auto phi = model.xc_phi_knots(path);
  for (std::size_t k = 0; k < image.knots(); ++k) {
    const EnergyValues e = energy(image[k], image.times()[k], phi[k], model);
    d.energy_times.push_back(image.times()[k]);
    d.energy_script.push_back(e.script);
    d.energy_physical.push_back(e.physical);
  }

  Rng rng(cfg_.seed + 17);
  const DensityPath own = map.density_path(solution);
  d.checks.push_back(make_check("duhamel_same_density",
                                duhamel_identity_residual(psi0_, own, own, model, *propagator_),
                                cfg_.tol.duhamel_same));
  const Trajectory other = random_trajectory(grid, N, map.times(), rng, sup_norm(solution));
  d.checks.push_back(make_check(
      "duhamel_identity",
      duhamel_identity_residual(psi0_, own, map.density_path(other), model, *propagator_), cfg_.tol.duhamel));

  if (model.coupled()) {
    const Trajectory omega = random_trajectory(grid, N, map.times(), rng, 1.0);
    d.checks.push_back(make_check("fd_central_1e-5", central_fd_error(map, solution, omega, 1e-5), cfg_.tol.fd));
    const FdTable t = gateaux_fd_check(map, solution, omega, {1e-2, 5e-3, 2.5e-3, 1.25e-3});
    d.fd_slope = t.central_slope;
    d.checks.push_back(make_check("fd_slope_deviation", std::abs(t.central_slope - 2.0), 0.3));
  }

  const EmbeddingConstants& e = embedding();
  if (model.hartree_enabled()) {
    double worst_prod = 0.0, worst_lip = 0.0;
    int fail_prod = 0, fail_lip = 0;
    for (int s = 0; s < cfg_.audit_samples; ++s) {
      const bool smooth = s % 2 == 0;
      const Field f = smooth ? random_smooth_field(grid, rng) : random_rough_field(grid, rng);
      const Field g = smooth ? random_rough_field(grid, rng) : random_smooth_field(grid, rng);
      const OrbitalSet psi = random_state(grid, N, rng, smooth);
      const CheckResult p = hartree_product_bound_check(f, g, psi, model, e);
      worst_prod = std::max(worst_prod, p.lhs / p.rhs);
      fail_prod += p.pass ? 0 : 1;
      const OrbitalSet a = random_state(grid, N, rng, smooth);
      const OrbitalSet b = random_state(grid, N, rng, !smooth);
      const CheckResult l = hartree_lipschitz_check(a, b, psi, model, e);
      worst_lip = std::max(worst_lip, l.lhs / l.rhs);
      fail_lip += l.pass ? 0 : 1;
    }
    CheckResult p = make_check("hartree_product_bound_worst_ratio", worst_prod, 1.0);
    p.pass = p.pass && fail_prod == 0;
    CheckResult l = make_check("hartree_lipschitz_worst_ratio", worst_lip, 1.0);
    l.pass = l.pass && fail_lip == 0;
    d.checks.push_back(p);
    d.checks.push_back(l);
  }

  const ConstantsBundle b = constants(map, cfg_.mode);
  if (model.coupled()) {
    const ConstantsBundle emp = cfg_.mode == "empirical" ? b : constants(map, "empirical");
    double worst = 0.0;
    std::uniform_real_distribution<double> frac(0.2, 1.0);
    for (int s = 0; s < cfg_.audit_samples; ++s) {
      const Trajectory p1 = random_trajectory(grid, N, map.times(), rng, emp.r * frac(rng));
      const Trajectory p2 = random_trajectory(grid, N, map.times(), rng, emp.r * frac(rng));
      const OrbitalSet psi = random_state(grid, N, rng, s % 2 == 0);
      const CheckResult c = potential_lipschitz_check(p1, p2, psi, map, emp.C);
      worst = std::max(worst, c.rhs > 0.0 ? c.lhs / c.rhs : 0.0);
    }
    d.checks.push_back(make_check("potential_lipschitz_worst_ratio", worst, 1.0));
  }
  const double measured = model.coupled() ? measure_contraction(map, b.r, cfg_.empirical_pairs, rng) : 0.0;
  d.checks.push_back(make_check("contraction_vs_gamma_" + b.mode, measured, b.gamma_t));

  d.zero_force = zero_force_value(image, model, map.phi_carry());
  return d;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  json report = header_json(cfg);
  int status = 0;
  const Experiment ex(cfg);

  int windows = 1;
  try {
    windows = ex.resolve_windows(cfg.mode);
  } catch (const std::exception& e) {
    report["time"]["windows"] = nullptr;
    report["status"] = "failed";
    report["error"] = e.what();
    write_json(dir / "report.json", report);
    err << "error: " << e.what() << '\n';
    return 1;
  }
  report["time"]["windows"] = windows;
  const FixedPointMap first = ex.first_window(windows);
  report["constants"] = constants_ledger(ex, first);
  if (cfg.solver != "picard") {
    try {
      report["newton_setup"] = setup_json(ex.setup(first, ex.constants(first, cfg.mode)));
    } catch (const std::exception& e) {
      report["newton_setup"] = json{{"mode", cfg.mode}, {"error", e.what()}};
    }
  }

  json solvers = json::object();
  std::vector<std::pair<std::string, Trajectory>> solutions;
  std::vector<PlotSeries> residual_series;
  for (const auto& name : selected_solvers(cfg.solver)) {
    json s;
    s["constants_mode"] = cfg.mode;
    try {
      const HorizonOutcome h = ex.solve_horizon(name, cfg.mode, windows);
      json per = json::array();
      for (std::size_t w = 0; w < h.per_window.size(); ++w) {
        const SolveOutcome& o = h.per_window[w];
        const std::string file = trace_file(name, static_cast<int>(w), windows);
        o.trace.write_csv((dir / file).string());
        json pw;
        pw["trace"] = file;
        pw["converged"] = o.trace.converged;
        pw["iterations"] = o.trace.records.size();
        pw["final_residual"] = o.trace.records.back().residual;
        pw["residual_floor"] = o.trace.floor;
        if (name == "picard") pw["predicted_iterations"] = o.predicted_iterations;
        if (o.handoff) {
          pw["handoff_iterations"] = o.handoff->records.size();
          pw["handoff_residual"] = o.handoff->records.back().residual;
        }
        if (name != "picard") {
          try {
            const OrderFit fit = convergence_order(o.trace.residuals(), o.trace.floor);
            pw["order"] = fit.order;
            pw["order_r_squared"] = fit.r_squared;
            pw["order_points"] = fit.points;
          } catch (const diagnostic_error& e) {
            pw["order"] = nullptr;
            pw["order_note"] = e.what();
          }
          bool kanone = true, kantwo = true, defect = true;
          json ns = json::array();
          for (std::size_t k = 1; k < o.trace.records.size(); ++k) {
            const IterationRecord& r = o.trace.records[k];
            if (r.step_norm > r.kanone_rhs + o.trace.floor) kanone = false;
            if (r.kantwo_lhs > r.kantwo_rhs + o.trace.floor) kantwo = false;
            if (name == "approx_newton") {
              ns.push_back(r.neumann_n);
              if (r.defect_measured > r.m_times_residual) defect = false;
            }
          }
          if (name == "newton") {
            pw["kanone_holds"] = kanone;
            pw["kantwo_holds"] = kantwo;
          } else {
            pw["neumann_orders"] = ns;
            pw["defect_within_M_residual"] = defect;
          }
          pw["kprime_applies"] = o.trace.total_kprime_applies();
          pw["error_bound"] = o.error_bound;
        }
        per.push_back(pw);
      }
      s["windows"] = per;
      s["converged"] = true;
      solutions.emplace_back(name, h.solution);
      const auto res = h.per_window.front().trace.residuals();
      PlotSeries ps{name, {}, res};
      for (std::size_t i = 0; i < res.size(); ++i) ps.x.push_back(static_cast<double>(i));
      residual_series.push_back(std::move(ps));
    } catch (const nonconvergence_error& e) {
      const std::string file = "trace_" + name + "_partial.csv";
      e.trace().write_csv((dir / file).string());
      s["converged"] = false;
      s["error"] = e.what();
      s["trace"] = file;
      status = 1;
    } catch (const std::exception& e) {
      s["converged"] = false;
      s["error"] = e.what();
      status = 1;
    }
    if (!s["converged"].get<bool>()) err << "solver " << name << " failed: " << s["error"].get<std::string>() << '\n';
    solvers[name] = s;
  }
  report["solvers"] = solvers;

  json agreement = json::array();
  for (std::size_t i = 0; i < solutions.size(); ++i)
    for (std::size_t j = i + 1; j < solutions.size(); ++j) {
      const double diff = sup_norm(solutions[i].second - solutions[j].second);
      const double bound =
          10.0 * (solver_tolerance(cfg, solutions[i].first) + solver_tolerance(cfg, solutions[j].first));
      agreement.push_back(json{{"pair", solutions[i].first + "/" + solutions[j].first},
                               {"sup_difference", diff},
                               {"bound", bound},
                               {"pass", diff <= bound}});
      if (diff > bound) status = 1;
    }
  report["agreement"] = agreement;

  if (!solutions.empty()) {
    const Trajectory& sol = solutions.front().second;
    const auto res = energy_identity_residual(sol, ex.model());
    json d;
    d["source"] = solutions.front().first;
    d["unitarity_drift"] = max_unitarity_drift(sol);
    d["energy_identity_residual"] = max_abs(res);
    d["zero_force"] = zero_force_value(sol, ex.model());
    report["diagnostics"] = d;
    if (cfg.plots) {
      write_svg((dir / "residuals.svg").string(), {"Residual history (first window)", "iteration", "residual", true},
                residual_series);
      const DensityPath path = DensityPath::from_trajectory(sol);
      const auto phi = ex.model().xc_phi_knots(path);
      PlotSeries es{"script energy", sol.times(), {}};
      for (std::size_t k = 0; k < sol.knots(); ++k)
        es.y.push_back(energy(sol[k], sol.times()[k], phi[k], ex.model()).script);
      write_svg((dir / "energy.svg").string(), {"Energy functional", "t", "energy", false}, {es});
    }
  }
  report["status"] = status == 0 ? "ok" : "failed";
  write_json(dir / "report.json", report);
  out << "report: " << (dir / "report.json").string() << '\n';
  for (auto it = solvers.begin(); it != solvers.end(); ++it) {
    out << it.key() << ": " << (it.value()["converged"].get<bool>() ? "converged" : "FAILED");
    if (it.value().contains("windows")) {
      const auto& w0 = it.value()["windows"][0];
      out << " iterations=" << w0["iterations"];
      if (w0.contains("order") && !w0["order"].is_null()) out << " order=" << w0["order"].get<double>();
    }
    out << '\n';
  }
  return status;
}

int verify_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  json report = header_json(cfg);
  const Experiment ex(cfg);
  DiagnosticsReport d;
  try {
    const int windows = ex.resolve_windows(cfg.mode);
    report["time"]["windows"] = windows;
    const FixedPointMap map = ex.first_window(windows);
    PicardOptions po;
    po.target_residual = cfg.tol.picard;
    const PicardResult p = picard_solve(map, po);
    d = ex.diagnostics(map, p.solution);
  } catch (const std::exception& e) {
    report["status"] = "failed";
    report["error"] = e.what();
    write_json(dir / "verify.json", report);
    err << "error: " << e.what() << '\n';
    return 1;
  }
  json checks = json::array();
  for (const auto& c : d.checks) {
    checks.push_back(check_json(c));
    (c.pass ? out : err) << (c.pass ? "PASS " : "FAIL ") << c.name << " lhs=" << c.lhs << " rhs=" << c.rhs
                         << " margin=" << c.margin() << '\n';
  }
  report["checks"] = checks;
  report["reported"] = {{"zero_force", d.zero_force}, {"fd_central_slope", d.fd_slope}};
  report["energy"] = {{"t", d.energy_times}, {"script", d.energy_script}, {"physical", d.energy_physical}};
  report["status"] = d.all_pass() ? "ok" : "failed";
  write_json(dir / "verify.json", report);
  if (cfg.plots)
    write_svg((dir / "energy.svg").string(), {"Energy functional", "t", "energy", false},
              {{"script energy", d.energy_times, d.energy_script}, {"physical energy", d.energy_times, d.energy_physical}});
  return d.all_pass() ? 0 : 1;
}

int constants_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Experiment ex(cfg);
  json j = header_json(cfg);
  try {
    const int windows = ex.resolve_windows(cfg.mode);
    j["time"]["windows"] = windows;
    const FixedPointMap map = ex.first_window(windows);
    j["constants"] = constants_ledger(ex, map);
    for (const char* mode : {"analytic", "empirical"}) {
      try {
        j["newton_setup"][mode] = setup_json(ex.setup(map, ex.constants(map, mode)));
      } catch (const std::exception& e) {
        j["newton_setup"][mode] = json{{"mode", mode}, {"error", e.what()}};
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    j["error"] = e.what();
    out << j.dump(2) << '\n';
    return 1;
  }
  out << j.dump(2) << '\n';
  return 0;
}

}  // namespace tdks
