#include "tdks/trace.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "tdks/errors.hpp"

namespace tdks {

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::vector<double> IterationTrace::residuals() const {
  std::vector<double> r;
  r.reserve(records.size());
  for (const auto& rec : records) r.push_back(rec.residual);
  return r;
}

int IterationTrace::total_kprime_applies() const {
  int s = 0;
  for (const auto& rec : records) s += rec.kprime_applies;
  return s;
}

void IterationTrace::write_csv(std::ostream& os) const {
  os << "iter,residual,step_norm,kantwo_lhs,kantwo_rhs,neumann_n,defect_measured,M_times_residual\n";
  for (const auto& r : records) {
    os << r.iter << ',' << num(r.residual) << ',' << num(r.step_norm) << ',' << num(r.kantwo_lhs) << ','
       << num(r.kantwo_rhs) << ',' << r.neumann_n << ',' << num(r.defect_measured) << ','
       << num(r.m_times_residual) << '\n';
  }
}

void IterationTrace::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw configuration_error("cannot write trace file " + path);
  write_csv(f);
}

}  // namespace tdks
