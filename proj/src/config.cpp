#include "tdks/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "tdks/errors.hpp"

namespace tdks {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const YAML::Mark m = at.Mark();
    std::ostringstream os;
    os << source_;
    if (m.line >= 0) os << ':' << m.line + 1 << ':' << m.column + 1;
    os << ": " << msg;
    throw configuration_error(os.str());
  }

  void expect_map(const YAML::Node& n, const std::string& what) const {
    if (!n.IsMap()) fail(n, what + " must be a mapping");
  }

  void allow_keys(const YAML::Node& n, const std::set<std::string>& keys, const std::string& what) const {
    expect_map(n, what);
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!keys.count(key)) fail(kv.first, "unknown key '" + key + "' in " + what);
    }
  }

  template <typename T>
  void get(const YAML::Node& parent, const char* key, T& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, std::string("invalid value for '") + key + "'");
    }
  }

  void positive(const YAML::Node& parent, const char* key, double& out) const {
    get(parent, key, out);
    if (!(out > 0.0) || !std::isfinite(out)) fail(parent[key] ? parent[key] : parent, std::string(key) + " must be positive");
  }

  void one_of(const YAML::Node& parent, const char* key, std::string& out, const std::set<std::string>& allowed) const {
    get(parent, key, out);
    if (!allowed.count(out)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(parent[key] ? parent[key] : parent, std::string(key) + " must be one of: " + list);
    }
  }

 private:
  std::string source_;
};

void read_orbitals(const Reader& r, const YAML::Node& n, RunConfig& cfg) {
  if (!n.IsSequence() || n.size() == 0) r.fail(n, "initial_state.orbitals must be a non-empty list");
  for (const auto& o : n) {
    r.allow_keys(o, {"center", "width", "momentum", "hermite", "norm"}, "orbital");
    OrbitalSpec spec;
    r.get(o, "center", spec.center);
    r.get(o, "momentum", spec.momentum);
    r.positive(o, "width", spec.width);
    r.get(o, "hermite", spec.hermite);
    r.positive(o, "norm", spec.norm);
    if (spec.hermite < 0 || spec.hermite > 8) r.fail(o, "hermite order must lie in [0, 8]");
    if (!spec.center.empty() && static_cast<int>(spec.center.size()) != cfg.dim)
      r.fail(o["center"], "center needs one entry per dimension");
    if (!spec.momentum.empty() && static_cast<int>(spec.momentum.size()) != cfg.dim)
      r.fail(o["momentum"], "momentum needs one entry per dimension");
    cfg.orbitals.push_back(spec);
  }
}

double hermite(int k, double x) {
  double a = 1.0, b = 2.0 * x;
  if (k == 0) return a;
  for (int j = 1; j < k; ++j) {
    const double c = 2.0 * x * b - 2.0 * j * a;
    a = b;
    b = c;
  }
  return b;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, const std::string& source_name) {
  const Reader r(source_name);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << source_name << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
    throw configuration_error(os.str());
  }
  RunConfig cfg;
  cfg.source_name = source_name;
  cfg.config_hash = fnv1a_hex(text);
  r.allow_keys(root, {"grid", "physics", "potential", "initial_state", "time", "solver", "mode", "tolerances",
                      "newton", "seed", "empirical_pairs", "audit_samples", "plots", "output_dir"},
               "configuration");

  if (const auto g = root["grid"]) {
    r.allow_keys(g, {"dim", "points", "length"}, "grid");
    r.get(g, "dim", cfg.dim);
    if (cfg.dim != 1 && cfg.dim != 3) r.fail(g["dim"] ? g["dim"] : g, "grid.dim must be 1 or 3");
    r.get(g, "points", cfg.points);
    if (cfg.points < 2) r.fail(g["points"] ? g["points"] : g, "grid.points must be at least 2");
    r.positive(g, "length", cfg.length);
  } else {
    r.fail(root, "missing 'grid' section");
  }

  if (const auto p = root["physics"]) {
    r.allow_keys(p, {"hbar", "mass"}, "physics");
    r.positive(p, "hbar", cfg.hbar);
    r.positive(p, "mass", cfg.mass);
  }
  cfg.external.mass = cfg.mass;

  if (const auto p = root["potential"]) {
    r.allow_keys(p, {"external", "hartree", "xc"}, "potential");
    if (const auto e = p["external"]) {
      r.allow_keys(e, {"family", "offset", "omega", "drive_amplitude", "drive_frequency"}, "potential.external");
      r.one_of(e, "family", cfg.external.family, {"zero", "constant", "harmonic"});
      r.get(e, "offset", cfg.external.offset);
      r.get(e, "omega", cfg.external.omega);
      r.get(e, "drive_amplitude", cfg.external.drive_amplitude);
      r.get(e, "drive_frequency", cfg.external.drive_frequency);
      try {
        cfg.external.validate();
      } catch (const std::exception& ex) {
        r.fail(e, ex.what());
      }
    }
    if (const auto h = p["hartree"]) {
      r.allow_keys(h, {"enabled", "coupling", "radius"}, "potential.hartree");
      r.get(h, "enabled", cfg.hartree.enabled);
      r.get(h, "coupling", cfg.hartree.coupling);
      r.get(h, "radius", cfg.hartree.radius);
      if (!(cfg.hartree.coupling >= 0.0)) r.fail(h["coupling"], "hartree coupling must be nonnegative");
    }
    if (const auto x = p["xc"]) {
      r.allow_keys(x, {"enabled", "coupling", "width"}, "potential.xc");
      bool enabled = true;
      r.get(x, "enabled", enabled);
      XCParams xp;
      r.get(x, "coupling", xp.coupling);
      r.positive(x, "width", xp.width);
      if (!(xp.coupling >= 0.0)) r.fail(x["coupling"], "xc coupling must be nonnegative");
      if (enabled) cfg.xc = xp;
    }
  }

  if (const auto s = root["initial_state"]) {
    r.allow_keys(s, {"orbitals"}, "initial_state");
    read_orbitals(r, s["orbitals"], cfg);
  } else {
    r.fail(root, "missing 'initial_state' section");
  }

  if (const auto t = root["time"]) {
    r.allow_keys(t, {"T", "dt", "windows", "gamma_cap"}, "time");
    r.positive(t, "T", cfg.T);
    r.positive(t, "dt", cfg.dt);
    if (!(cfg.dt < cfg.T)) r.fail(t["dt"] ? t["dt"] : t, "dt must be smaller than T");
    const double ratio = cfg.T / cfg.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) r.fail(t["dt"] ? t["dt"] : t, "dt must divide T");
    r.get(t, "windows", cfg.windows);
    if (cfg.windows < 0) r.fail(t["windows"], "windows must be nonnegative (0 = automatic)");
    if (cfg.windows > 0 && cfg.steps() % cfg.windows != 0) r.fail(t["windows"], "windows must divide the step count");
    r.positive(t, "gamma_cap", cfg.gamma_cap);
    if (!(cfg.gamma_cap < 1.0)) r.fail(t["gamma_cap"], "gamma_cap must be below 1");
  } else {
    r.fail(root, "missing 'time' section");
  }

  r.one_of(root, "solver", cfg.solver, {"picard", "newton", "approx_newton", "all"});
  r.one_of(root, "mode", cfg.mode, {"analytic", "empirical"});

  if (const auto t = root["tolerances"]) {
    r.allow_keys(t, {"picard", "linearized", "linear_solve", "unitarity", "energy", "duhamel", "duhamel_same", "fd"},
                 "tolerances");
    r.positive(t, "picard", cfg.tol.picard);
    r.positive(t, "linearized", cfg.tol.linearized);
    r.positive(t, "linear_solve", cfg.tol.linear_solve);
    r.positive(t, "unitarity", cfg.tol.unitarity);
    r.positive(t, "energy", cfg.tol.energy);
    r.positive(t, "duhamel", cfg.tol.duhamel);
    r.positive(t, "duhamel_same", cfg.tol.duhamel_same);
    r.positive(t, "fd", cfg.tol.fd);
  }

  if (const auto n = root["newton"]) {
    r.allow_keys(n, {"h", "alpha", "tau", "delta", "max_iters", "n_max", "fixed_n"}, "newton");
    r.positive(n, "h", cfg.newton.h);
    r.positive(n, "alpha", cfg.newton.alpha);
    r.positive(n, "tau", cfg.newton.tau);
    if (cfg.newton.h > 0.5) r.fail(n["h"], "newton.h must not exceed 1/2");
    if (!(cfg.newton.alpha < 1.0)) r.fail(n["alpha"], "newton.alpha must be below 1");
    if (!(cfg.newton.tau < 1.0)) r.fail(n["tau"], "newton.tau must be below 1");
    r.get(n, "delta", cfg.newton.delta);
    if (!(cfg.newton.delta >= 0.0)) r.fail(n["delta"], "newton.delta must be nonnegative (0 = ball radius r)");
    r.get(n, "max_iters", cfg.newton.max_iters);
    r.get(n, "n_max", cfg.newton.n_max);
    r.get(n, "fixed_n", cfg.newton.fixed_n);
    if (cfg.newton.max_iters < 1) r.fail(n["max_iters"], "newton.max_iters must be positive");
    if (cfg.newton.n_max < 1) r.fail(n["n_max"], "newton.n_max must be positive");
    if (cfg.newton.fixed_n < 0) r.fail(n["fixed_n"], "newton.fixed_n must be nonnegative");
  }

  r.get(root, "seed", cfg.seed);
  r.get(root, "empirical_pairs", cfg.empirical_pairs);
  if (cfg.empirical_pairs < 1) r.fail(root["empirical_pairs"], "empirical_pairs must be positive");
  r.get(root, "audit_samples", cfg.audit_samples);
  if (cfg.audit_samples < 1) r.fail(root["audit_samples"], "audit_samples must be positive");
  r.get(root, "plots", cfg.plots);
  r.get(root, "output_dir", cfg.output_dir);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw configuration_error(path + ": cannot read configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

int RunConfig::steps() const { return static_cast<int>(std::lround(T / dt)); }

Grid RunConfig::grid() const { return Grid(dim, points, length); }

PotentialModel RunConfig::model() const { return PotentialModel(grid(), external, hartree, xc, hbar, mass); }

OrbitalSet RunConfig::initial_state() const {
  const Grid g = grid();
  Eigen::MatrixXcd values(g.size(), static_cast<Eigen::Index>(orbitals.size()));
  for (std::size_t j = 0; j < orbitals.size(); ++j) {
    const OrbitalSpec& o = orbitals[j];
    for (Eigen::Index p = 0; p < g.size(); ++p) {
      const auto x = g.position(p);
      double r2 = 0.0, phase = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double c = o.center.empty() ? 0.5 * length : o.center[a];
        r2 += (x[a] - c) * (x[a] - c);
        if (!o.momentum.empty()) phase += o.momentum[a] * x[a];
      }
      const double c0 = o.center.empty() ? 0.5 * length : o.center[0];
      const double amp = hermite(o.hermite, (x[0] - c0) / o.width) * std::exp(-r2 / (2.0 * o.width * o.width));
      values(p, static_cast<Eigen::Index>(j)) = amp * std::polar(1.0, phase);
    }
    OrbitalSet single(g, values.col(static_cast<Eigen::Index>(j)).eval());
    const double n = norm(single, NormKind::L2);
    if (!(n > 0.0)) throw configuration_error("orbital " + std::to_string(j) + " vanishes on the grid");
    values.col(static_cast<Eigen::Index>(j)) *= o.norm / n;
  }
  return OrbitalSet(g, values);
}

void RunConfig::validate() const {
  if (orbitals.empty()) throw configuration_error("no orbitals configured");
  if (!(dt < T)) throw configuration_error("dt must be smaller than T");
}

}  // namespace tdks
