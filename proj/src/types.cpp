#include "wdro/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wdro/error.hpp"

namespace wdro {

Dataset::Dataset(std::vector<Sample> samples, int num_labels)
    : samples_(std::move(samples)), J_(num_labels) {
  if (samples_.empty()) throw ValidationError("dataset must contain at least one sample");
  if (J_ < 1) throw ValidationError("label count J must be >= 1, got " + std::to_string(J_));
  d_ = samples_.front().x.size();
  if (d_ == 0) throw ValidationError("feature dimension d must be >= 1");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.x.size() != d_) {
      throw ValidationError("sample " + std::to_string(i) + " has dimension " +
                            std::to_string(s.x.size()) + ", expected " + std::to_string(d_));
    }
    if (s.y < 1 || s.y > J_) {
      throw ValidationError("sample " + std::to_string(i) + " has label " + std::to_string(s.y) +
                            " outside 1.." + std::to_string(J_));
    }
    for (double v : s.x) {
      if (!std::isfinite(v)) throw ValidationError("sample " + std::to_string(i) + " has a non-finite feature");
    }
    if (!std::isfinite(s.target)) throw ValidationError("sample " + std::to_string(i) + " has a non-finite target");
  }
}

void CostParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("kappa must be positive and finite");
}

std::vector<double> ParamPoint::flat() const {
  std::vector<double> v(theta);
  v.push_back(lambda);
  return v;
}

ParamPoint ParamPoint::from_flat(std::span<const double> v) {
  if (v.empty()) throw ValidationError("flat parameter vector must hold at least lambda");
  ParamPoint w;
  w.theta.assign(v.begin(), v.end() - 1);
  w.lambda = v.back();
  return w;
}

void ParamBox::validate() const {
  if (theta_lo.size() != theta_hi.size()) {
    throw ValidationError("theta bounds have different lengths (" + std::to_string(theta_lo.size()) +
                          " vs " + std::to_string(theta_hi.size()) + ")");
  }
  for (std::size_t j = 0; j < theta_lo.size(); ++j) {
    if (!std::isfinite(theta_lo[j]) || !std::isfinite(theta_hi[j]) || theta_lo[j] > theta_hi[j]) {
      throw ValidationError("theta bound " + std::to_string(j) + " is not an ordered finite interval");
    }
  }
  if (!(lambda_min > 0.0) || !(lambda_min <= lambda_max) || !std::isfinite(lambda_max)) {
    throw ValidationError("lambda bounds must satisfy 0 < lambda_min <= lambda_max, got [" +
                          std::to_string(lambda_min) + ", " + std::to_string(lambda_max) + "]");
  }
}

bool ParamBox::contains(const ParamPoint& w) const {
  if (w.theta.size() != theta_lo.size()) return false;
  for (std::size_t j = 0; j < theta_lo.size(); ++j) {
    if (!(w.theta[j] >= theta_lo[j] && w.theta[j] <= theta_hi[j])) return false;
  }
  return w.lambda >= lambda_min && w.lambda <= lambda_max;
}

double ParamBox::max_theta_norm() const {
  double s = 0.0;
  for (std::size_t j = 0; j < theta_lo.size(); ++j) {
    const double a = std::max(std::abs(theta_lo[j]), std::abs(theta_hi[j]));
    s += a * a;
  }
  return std::sqrt(s);
}

double ParamBox::diameter() const {
  double s = (lambda_max - lambda_min) * (lambda_max - lambda_min);
  for (std::size_t j = 0; j < theta_lo.size(); ++j) {
    s += (theta_hi[j] - theta_lo[j]) * (theta_hi[j] - theta_lo[j]);
  }
  return std::sqrt(s);
}

ParamPoint ParamBox::center() const {
  ParamPoint w;
  w.theta.resize(theta_lo.size());
  for (std::size_t j = 0; j < theta_lo.size(); ++j) w.theta[j] = 0.5 * (theta_lo[j] + theta_hi[j]);
  w.lambda = 0.5 * (lambda_min + lambda_max);
  return w;
}

void RobustnessConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ValidationError("rho must be positive and finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be positive and finite");
}

}  // namespace wdro
