#include "tdks/potentials.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "tdks/errors.hpp"

namespace tdks {

namespace {

// FFTW's planner is not re-entrant; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Integral of 1/|x| over the unit cube centred at the origin.
constexpr double kUnitCubeCoulombAverage = 2.3800772;

}  // namespace

// ---------------------------------------------------------------------------

void ExternalPotential::validate() const {
  if (family != "zero" && family != "constant" && family != "harmonic")
    throw configuration_error("unknown external potential family '" + family + "'");
  if (!(offset >= 0.0)) throw model_violation("external potential offset must be nonnegative");
  if (std::abs(drive_amplitude) > 1.0)
    throw model_violation("drive amplitude above 1 makes the harmonic potential negative");
  if (!(omega >= 0.0) || !(mass > 0.0)) throw configuration_error("harmonic omega/mass out of range");
}

bool ExternalPotential::is_static() const {
  return family != "harmonic" || drive_amplitude == 0.0 || drive_frequency == 0.0;
}

Field ExternalPotential::value(const Grid& grid, double t) const {
  if (family == "zero") return Field::Zero(grid.size());
  if (family == "constant") return Field::Constant(grid.size(), offset);
  const double c = 0.5 * grid.axis_length();
  const double scale = 0.5 * mass * omega * omega * (1.0 + drive_amplitude * std::sin(drive_frequency * t));
  Field v(grid.size());
  for (Eigen::Index p = 0; p < v.size(); ++p) {
    const auto x = grid.position(p);
    double r2 = 0.0;
    for (int a = 0; a < grid.dim(); ++a) r2 += (x[a] - c) * (x[a] - c);
    v(p) = offset + scale * r2;
  }
  return v;
}

Field ExternalPotential::time_derivative(const Grid& grid, double t) const {
  if (is_static()) return Field::Zero(grid.size());
  const double c = 0.5 * grid.axis_length();
  const double scale =
      0.5 * mass * omega * omega * drive_amplitude * drive_frequency * std::cos(drive_frequency * t);
  Field v(grid.size());
  for (Eigen::Index p = 0; p < v.size(); ++p) {
    const auto x = grid.position(p);
    double r2 = 0.0;
    for (int a = 0; a < grid.dim(); ++a) r2 += (x[a] - c) * (x[a] - c);
    v(p) = scale * r2;
  }
  return v;
}

// ---------------------------------------------------------------------------

struct ConvolutionKernel::Plan {
  int n = 0;           // points per axis
  int dim = 1;
  int m = 0;           // padded length per axis (2n)
  std::size_t real_size = 0;
  std::size_t complex_size = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> kernel_hat;

  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

ConvolutionKernel::ConvolutionKernel(const Grid& grid, const std::function<double(double)>& radial) : grid_(grid) {
  const int n = grid.points_per_axis();
  const int d = grid.dim();
  const int w = 2 * n - 1;  // offsets -(n-1) .. n-1
  const double h = grid.spacing();
  std::size_t box = 1;
  for (int a = 0; a < d; ++a) box *= static_cast<std::size_t>(w);
  samples_.assign(box, 0.0);

  auto box_index = [&](const std::array<int, 3>& k) {
    std::size_t idx = 0, s = 1;
    for (int a = 0; a < d; ++a) {
      idx += static_cast<std::size_t>(k[a] + n - 1) * s;
      s *= static_cast<std::size_t>(w);
    }
    return idx;
  };
  auto unpack = [&](std::size_t idx) {
    std::array<int, 3> k{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      k[a] = static_cast<int>(idx % w) - (n - 1);
      idx /= w;
    }
    return k;
  };

  for (std::size_t q = 0; q < box; ++q) {
    const auto k = unpack(q);
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += static_cast<double>(k[a]) * k[a];
    samples_[q] = radial(std::sqrt(r2) * h);
    if (!std::isfinite(samples_[q])) throw model_violation("convolution kernel is not finite on the stencil");
  }

  const double cell = grid.cell_volume();
  for (std::size_t q = 0; q < box; ++q) {
    l1_ += std::abs(samples_[q]);
    l2_ += samples_[q] * samples_[q];
    max_abs_ = std::max(max_abs_, std::abs(samples_[q]));
  }
  l1_ *= cell;
  l2_ = std::sqrt(l2_ * cell);
  double grad_sq = 0.0;
  for (int a = 0; a < d; ++a) {
    double s = 0.0;
    for (std::size_t q = 0; q < box; ++q) {
      auto k = unpack(q);
      if (k[a] == n - 1) continue;
      const double lo = samples_[q];
      k[a] += 1;
      s += std::abs(samples_[box_index(k)] - lo) / h;
    }
    s *= cell;
    grad_sq += s * s;
  }
  grad_l1_ = std::sqrt(grad_sq);

  auto plan = std::make_shared<Plan>();
  plan->n = n;
  plan->dim = d;
  plan->m = 2 * n;
  std::array<int, 3> dims{plan->m, plan->m, plan->m};
  plan->real_size = 1;
  for (int a = 0; a < d; ++a) plan->real_size *= static_cast<std::size_t>(plan->m);
  plan->complex_size = plan->real_size / plan->m * (plan->m / 2 + 1);

  double* in = fftw_alloc_real(plan->real_size);
  fftw_complex* out = fftw_alloc_complex(plan->complex_size);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan->forward = fftw_plan_dft_r2c(d, dims.data(), in, out, FFTW_ESTIMATE);
    plan->backward = fftw_plan_dft_c2r(d, dims.data(), out, in, FFTW_ESTIMATE);
  }
  // Kernel at offset k lives at index k mod 2n; the padded box holds all 2n-1
  // offsets without wraparound, so the circular product is the linear convolution.
  std::fill(in, in + plan->real_size, 0.0);
  for (std::size_t q = 0; q < box; ++q) {
    const auto k = unpack(q);
    std::size_t idx = 0, s = 1;
    for (int a = 0; a < d; ++a) {
      idx += static_cast<std::size_t>((k[a] + plan->m) % plan->m) * s;
      s *= static_cast<std::size_t>(plan->m);
    }
    in[idx] = samples_[q];
  }
  fftw_execute_dft_r2c(plan->forward, in, out);
  plan->kernel_hat.resize(plan->complex_size);
  for (std::size_t q = 0; q < plan->complex_size; ++q) plan->kernel_hat[q] = {out[q][0], out[q][1]};
  fftw_free(in);
  fftw_free(out);
  plan_ = std::move(plan);
}

double ConvolutionKernel::at_offset(const std::array<int, 3>& k) const {
  const int n = grid_.points_per_axis();
  const int w = 2 * n - 1;
  std::size_t idx = 0, s = 1;
  for (int a = 0; a < grid_.dim(); ++a) {
    if (std::abs(k[a]) > n - 1) throw range_error("kernel offset outside the stencil");
    idx += static_cast<std::size_t>(k[a] + n - 1) * s;
    s *= static_cast<std::size_t>(w);
  }
  return samples_[idx];
}

Field ConvolutionKernel::apply(const Field& f) const {
  if (f.size() != grid_.size()) throw structural_error("convolution: field size does not match grid");
  const Plan& p = *plan_;
  double* in = fftw_alloc_real(p.real_size);
  fftw_complex* out = fftw_alloc_complex(p.complex_size);
  std::fill(in, in + p.real_size, 0.0);
  for (Eigen::Index q = 0; q < f.size(); ++q) {
    const auto idx = grid_.multi_index(q);
    std::size_t j = 0, s = 1;
    for (int a = 0; a < p.dim; ++a) {
      j += static_cast<std::size_t>(idx[a]) * s;
      s *= static_cast<std::size_t>(p.m);
    }
    in[j] = f(q);
  }
  fftw_execute_dft_r2c(p.forward, in, out);
  for (std::size_t q = 0; q < p.complex_size; ++q) {
    const std::complex<double> z = std::complex<double>(out[q][0], out[q][1]) * p.kernel_hat[q];
    out[q][0] = z.real();
    out[q][1] = z.imag();
  }
  fftw_execute_dft_c2r(p.backward, out, in);
  const double scale = grid_.cell_volume() / static_cast<double>(p.real_size);
  Field g(f.size());
  for (Eigen::Index q = 0; q < f.size(); ++q) {
    const auto idx = grid_.multi_index(q);
    std::size_t j = 0, s = 1;
    for (int a = 0; a < p.dim; ++a) {
      j += static_cast<std::size_t>(idx[a]) * s;
      s *= static_cast<std::size_t>(p.m);
    }
    g(q) = in[j] * scale;
  }
  fftw_free(in);
  fftw_free(out);
  return g;
}

// ---------------------------------------------------------------------------

DensityPath DensityPath::from_trajectory(const Trajectory& traj, std::optional<Field> carry) {
  DensityPath p;
  p.times = traj.times();
  p.rho.reserve(traj.knots());
  for (const auto& s : traj.states()) p.rho.push_back(density(s));
  p.phi_carry = std::move(carry);
  return p;
}

DensityPath DensityPath::zeros(const Grid& grid, const std::vector<double>& times, std::optional<Field> carry) {
  DensityPath p;
  p.times = times;
  p.rho.assign(times.size(), Field::Zero(grid.size()));
  p.phi_carry = std::move(carry);
  return p;
}

Field DensityPath::at(double t) const {
  if (times.empty()) throw structural_error("density path is empty");
  const double tol = 1e-12 * std::max(1.0, std::abs(times.back()));
  if (t < times.front() - tol || t > times.back() + tol) throw range_error("time outside the density path");
  if (times.size() == 1) return rho.front();
  std::size_t k = 0;
  while (k + 2 < times.size() && t > times[k + 1]) ++k;
  const double s = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
  return (1.0 - s) * rho[k] + s * rho[k + 1];
}

// ---------------------------------------------------------------------------

XCModel::XCModel(const Grid& grid, XCParams params)
    : params_(params),
      kernel_(grid, [w = params.width, d = grid.dim()](double s) {
        return std::exp(-s * s / (2.0 * w * w)) / std::pow(2.0 * std::numbers::pi * w * w, 0.5 * d);
      }) {
  if (!(params.coupling >= 0.0)) throw model_violation("xc coupling must be nonnegative");
  if (!(params.width > 0.0)) throw configuration_error("xc kernel width must be positive");
}

Field XCModel::phi0(const Field& rho0) const { return params_.coupling * kernel_.apply(rho0); }

Field XCModel::rate(const Field& rho) const { return params_.coupling * kernel_.apply(rho); }

double XCModel::rate_sup_bound(double charge) const { return params_.coupling * kernel_.max_abs() * charge; }

// ---------------------------------------------------------------------------

PotentialModel::PotentialModel(Grid grid, ExternalPotential external, HartreeParams hartree,
                               std::optional<XCParams> xc, double hbar, double mass)
    : grid_(grid), external_(std::move(external)), hartree_params_(hartree), hbar_(hbar), mass_(mass) {
  if (!(hbar > 0.0) || !(mass > 0.0)) throw configuration_error("hbar and mass must be positive");
  external_.validate();
  if (hartree.enabled) {
    radius_ = hartree.radius < 0.0 ? 2.0 * grid.spacing() : hartree.radius;
    if (grid.dim() == 1 && !(radius_ > 0.0))
      throw configuration_error("1D Hartree kernel needs a positive mollification radius");
    if (!(hartree.coupling >= 0.0)) throw model_violation("Hartree coupling must be nonnegative");
    const double a = radius_, lam = hartree.coupling, h = grid.spacing();
    if (grid.dim() == 1) {
      hartree_kernel_.emplace(grid, [a, lam](double s) { return lam / std::sqrt(s * s + a * a); });
    } else {
      hartree_kernel_.emplace(grid, [a, lam, h](double s) {
        if (a == 0.0) return s == 0.0 ? lam * kUnitCubeCoulombAverage / h : lam / s;
        if (s >= a) return lam / s;
        // C1 blend matching 1/s and its slope at s = a.
        return lam * (3.0 * a * a - s * s) / (2.0 * a * a * a);
      });
    }
  }
  if (xc) xc_.emplace(grid, *xc);
}

const ConvolutionKernel& PotentialModel::hartree_kernel() const {
  if (!hartree_kernel_) throw configuration_error("Hartree term is disabled");
  return *hartree_kernel_;
}

const XCModel& PotentialModel::xc() const {
  if (!xc_) throw configuration_error("no exchange-correlation model configured");
  return *xc_;
}

Field PotentialModel::hartree(const Field& rho) const { return hartree_kernel().apply(rho); }

Field PotentialModel::phi_start(const DensityPath& path) const {
  if (path.phi_carry) return *path.phi_carry;
  return xc_->phi0(path.rho.front());
}

Field PotentialModel::xc_phi(const DensityPath& path, double t) const {
  if (path.times.empty()) throw structural_error("xc_phi: empty density path");
  const double tol = 1e-12 * std::max(1.0, std::abs(path.times.back()));
  if (t > path.times.back() + tol || t < path.times.front() - tol)
    throw range_error("xc_phi: time outside the density path");
  if (!xc_) return Field::Zero(grid_.size());
  Field integral = Field::Zero(grid_.size());
  std::size_t k = 0;
  for (; k + 1 < path.times.size() && path.times[k + 1] <= t + tol; ++k)
    integral += 0.5 * (path.times[k + 1] - path.times[k]) * (path.rho[k] + path.rho[k + 1]);
  if (k + 1 < path.times.size() && t > path.times[k]) integral += 0.5 * (t - path.times[k]) * (path.rho[k] + path.at(t));
  return phi_start(path) + xc_->rate(integral);
}

std::vector<Field> PotentialModel::xc_phi_knots(const DensityPath& path) const {
  std::vector<Field> out;
  out.reserve(path.times.size());
  if (!xc_) {
    out.assign(path.times.size(), Field::Zero(grid_.size()));
    return out;
  }
  const Field start = phi_start(path);
  Field integral = Field::Zero(grid_.size());
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    if (k > 0) integral += 0.5 * (path.times[k] - path.times[k - 1]) * (path.rho[k - 1] + path.rho[k]);
    out.push_back(start + xc_->rate(integral));
  }
  return out;
}

Field PotentialModel::effective_potential(double t, const DensityPath& path) const {
  Field v = external_at(t);
  if (hartree_enabled()) v += hartree(path.at(t));
  if (xc_) v += xc_phi(path, t);
  return v;
}

std::vector<Field> PotentialModel::step_potentials(const DensityPath& path) const {
  if (path.rho.size() != path.times.size()) throw structural_error("density path: knot count mismatch");
  std::vector<Field> out;
  if (path.times.size() < 2) return out;
  out.reserve(path.times.size() - 1);
  const Field start = xc_ ? phi_start(path) : Field();
  Field integral = Field::Zero(grid_.size());
  for (std::size_t n = 0; n + 1 < path.times.size(); ++n) {
    const double dt = path.times[n + 1] - path.times[n];
    const double th = path.times[n] + 0.5 * dt;
    const Field mid = 0.5 * (path.rho[n] + path.rho[n + 1]);
    Field v = external_at(th);
    if (hartree_enabled()) v += hartree(mid);
    if (xc_) {
      v += start + xc_->rate(integral + 0.25 * dt * (path.rho[n] + mid));
      integral += 0.5 * dt * (path.rho[n] + path.rho[n + 1]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Field> PotentialModel::step_potential_increments(const std::vector<double>& times,
                                                             const std::vector<Field>& drho,
                                                             bool with_initial_history) const {
  if (drho.size() != times.size()) throw structural_error("density increment: knot count mismatch");
  std::vector<Field> out;
  if (times.size() < 2) return out;
  out.reserve(times.size() - 1);
  // Accumulate the xc integrand first so each step needs a single xc convolution.
  Field integral = (xc_ && with_initial_history) ? Field(drho.front()) : Field::Zero(grid_.size());
  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const double dt = times[n + 1] - times[n];
    const Field mid = 0.5 * (drho[n] + drho[n + 1]);
    Field v = Field::Zero(grid_.size());
    if (hartree_enabled()) v += hartree(mid);
    if (xc_) {
      v += xc_->rate(integral + 0.25 * dt * (drho[n] + mid));
      integral += 0.5 * dt * (drho[n] + drho[n + 1]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Field> PotentialModel::xc_derivative_apply(const DensityPath& base, const std::vector<Field>& product,
                                                       bool include_initial) const {
  if (!xc_) throw configuration_error("xc_derivative_apply: no exchange-correlation model configured");
  if (product.size() != base.times.size()) throw structural_error("xc_derivative_apply: knot count mismatch");
  // The built-in history is linear in rho, so the derivative does not depend on the base density.
  std::vector<Field> out;
  out.reserve(product.size());
  Field integral = include_initial ? product.front() : Field::Zero(grid_.size());
  for (std::size_t k = 0; k < product.size(); ++k) {
    if (k > 0) integral += 0.5 * (base.times[k] - base.times[k - 1]) * (product[k - 1] + product[k]);
    out.push_back(xc_->rate(integral));
  }
  return out;
}

}  // namespace tdks
