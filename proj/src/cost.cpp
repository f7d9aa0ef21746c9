#include "wdro/cost.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wdro/error.hpp"

namespace wdro {

double mixed_cost(std::span<const double> x, int y, std::span<const double> x2, int y2,
                  const CostParams& cp) {
  if (x.size() != x2.size()) {
    throw ValidationError("mixed_cost: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(x2.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - x2[j];
    s += d * d;
  }
  return y == y2 ? s : s + cp.kappa;
}

double mixed_cost(const Sample& xi, const Sample& zeta, const CostParams& cp) {
  return mixed_cost(xi.x, xi.y, zeta.x, zeta.y, cp);
}

ParamPoint project_box(const ParamPoint& w, const ParamBox& box) {
  ParamPoint out;
  out.theta.resize(w.theta.size());
  for (std::size_t j = 0; j < w.theta.size(); ++j) {
    out.theta[j] = std::clamp(w.theta[j], box.theta_lo[j], box.theta_hi[j]);
  }
  out.lambda = std::clamp(w.lambda, box.lambda_min, box.lambda_max);
  return out;
}

namespace {
int activity(double v, double lo, double hi) {
  if (lo == hi) return 2;
  if (v <= lo) return -1;
  if (v >= hi) return 1;
  return 0;
}
}  // namespace

std::vector<int> active_faces(const ParamPoint& w, const ParamBox& box) {
  std::vector<int> a(w.theta.size() + 1);
  for (std::size_t j = 0; j < w.theta.size(); ++j) a[j] = activity(w.theta[j], box.theta_lo[j], box.theta_hi[j]);
  a.back() = activity(w.lambda, box.lambda_min, box.lambda_max);
  return a;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

double distance(const ParamPoint& a, const ParamPoint& b) {
  double s = (a.lambda - b.lambda) * (a.lambda - b.lambda);
  for (std::size_t j = 0; j < a.theta.size(); ++j) s += (a.theta[j] - b.theta[j]) * (a.theta[j] - b.theta[j]);
  return std::sqrt(s);
}

}  // namespace wdro
