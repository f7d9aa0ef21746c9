#include "wdro/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wdro/error.hpp"
#include "wdro/parallel.hpp"

namespace wdro {
namespace {

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be positive and finite");
}

// exp((h_l - h_max) / beta); the argmax term is exactly 1.
std::vector<double> shifted_exponentials(const ExponentTable& t, double beta) {
  std::vector<double> e(t.size());
  for (std::size_t l = 0; l < t.size(); ++l) e[l] = std::exp((t.h[l] - t.h_max) / beta);
  return e;
}

}  // namespace

ExponentTable ExponentTable::from_values(std::vector<double> h) {
  if (h.empty()) throw ValidationError("exponent table must be nonempty");
  ExponentTable t;
  t.h = std::move(h);
  t.h_max = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < t.h.size(); ++l) {
    if (!std::isfinite(t.h[l])) throw NumericError("exponent table entry " + std::to_string(l) + " is not finite");
    t.h_max = std::max(t.h_max, t.h[l]);
  }
  return t;
}

ExponentTable exponent_table(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                             const NoiseBank& bank, const CostParams& cp, bool with_gradients) {
  if (!(lambda > 0.0)) throw ValidationError("exponent_table: lambda must be positive");
  if (bank.dim() != xi.x.size()) {
    throw ValidationError("exponent_table: bank dimension " + std::to_string(bank.dim()) +
                          " differs from sample dimension " + std::to_string(xi.x.size()));
  }
  const std::size_t m = bank.size();
  const std::size_t d = bank.dim();
  const std::size_t p = model.param_dim();
  ExponentTable t;
  t.p = p;
  t.h.resize(m);
  t.transport.resize(m);
  if (with_gradients) t.grad_theta.resize(m * p);
  t.h_max = -std::numeric_limits<double>::infinity();

  std::vector<double> x(d);
  for (std::size_t l = 0; l < m; ++l) {
    const auto omega = bank.omega(l);
    for (std::size_t j = 0; j < d; ++j) x[j] = xi.x[j] + omega[j];
    const int z = bank.z(l);
    std::span<double> g = with_gradients ? std::span<double>(t.grad_theta.data() + l * p, p) : std::span<double>{};
    const double f = model.evaluate(theta, x, z, xi.target, g, {});
    if (!std::isfinite(f)) throw NumericError("loss is not finite at noise index " + std::to_string(l));
    const double c = bank.omega_sqnorm(l) + (z != xi.y ? cp.kappa : 0.0);
    t.transport[l] = c;
    t.h[l] = f - lambda * c;
    t.h_max = std::max(t.h_max, t.h[l]);
  }
  return t;
}

double phi_beta_m(const ExponentTable& table, double beta) {
  check_beta(beta);
  if (table.h.empty()) throw ValidationError("phi_beta_m: empty table");
  const std::vector<double> e = shifted_exponentials(table, beta);
  const double mean = pairwise_sum(e) / static_cast<double>(e.size());
  return table.h_max + beta * std::log(mean);
}

SoftmaxWeights softmax_weights(const ExponentTable& table, double beta) {
  check_beta(beta);
  SoftmaxWeights sw;
  sw.w = shifted_exponentials(table, beta);
  const double s = pairwise_sum(sw.w);
  if (!(s >= 1.0) || !std::isfinite(s)) throw NumericError("softmax normalizer degenerate");
  for (double& w : sw.w) w /= s;
  return sw;
}

std::vector<double> GradPair::flat() const {
  std::vector<double> v(g_theta);
  v.push_back(g_lambda);
  return v;
}

ValueGrad sample_value_and_grad(const LossModel& model, std::span<const double> theta, double lambda,
                                const Sample& xi, const NoiseBank& bank, const CostParams& cp,
                                const RobustnessConfig& cfg) {
  check_beta(cfg.beta);
  const ExponentTable t = exponent_table(model, theta, lambda, xi, bank, cp, true);
  const std::size_t m = t.size();
  const std::size_t p = t.p;
  std::vector<double> e = shifted_exponentials(t, cfg.beta);
  const double s = pairwise_sum(e);
  if (!(s >= 1.0) || !std::isfinite(s)) throw NumericError("softmax normalizer degenerate");

  std::vector<double> rows(m * p);
  std::vector<double> ec(m);
  for (std::size_t l = 0; l < m; ++l) {
    for (std::size_t j = 0; j < p; ++j) rows[l * p + j] = e[l] * t.grad_theta[l * p + j];
    ec[l] = e[l] * t.transport[l];
  }
  ValueGrad out;
  out.grad.g_theta.assign(p, 0.0);
  pairwise_sum_rows(rows, m, p, out.grad.g_theta);
  for (double& g : out.grad.g_theta) g /= s;
  out.grad.g_lambda = cfg.rho - pairwise_sum(ec) / s;
  out.value = lambda * cfg.rho + t.h_max + cfg.beta * std::log(s / static_cast<double>(m));
  return out;
}

GradPair grad_pair(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                   const NoiseBank& bank, const CostParams& cp, const RobustnessConfig& cfg) {
  return sample_value_and_grad(model, theta, lambda, xi, bank, cp, cfg).grad;
}

double objective_F(const LossModel& model, const ParamPoint& w, const Dataset& data, const NoiseBank& bank,
                   const CostParams& cp, const RobustnessConfig& cfg) {
  check_beta(cfg.beta);
  std::vector<double> phis(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    phis[i] = phi_beta_m(exponent_table(model, w.theta, w.lambda, data[i], bank, cp, false), cfg.beta);
  });
  return w.lambda * cfg.rho + pairwise_sum(phis) / static_cast<double>(data.size());
}

ValueGrad full_value_and_gradient(const LossModel& model, const ParamPoint& w, const Dataset& data,
                                  const NoiseBank& bank, const CostParams& cp, const RobustnessConfig& cfg) {
  const std::size_t n = data.size();
  const std::size_t q = w.theta.size() + 1;
  std::vector<double> values(n);
  std::vector<double> grads(n * q);
  // Per-sample rows hold phi and its gradient; rho enters once below.
  const RobustnessConfig no_rho{0.0, cfg.beta};
  parallel_for(n, [&](std::size_t i) {
    const ValueGrad vg = sample_value_and_grad(model, w.theta, w.lambda, data[i], bank, cp, no_rho);
    values[i] = vg.value;
    std::copy(vg.grad.g_theta.begin(), vg.grad.g_theta.end(), grads.begin() + static_cast<std::ptrdiff_t>(i * q));
    grads[i * q + q - 1] = vg.grad.g_lambda;
  });
  std::vector<double> sum(q);
  pairwise_sum_rows(grads, n, q, sum);
  const double inv_n = 1.0 / static_cast<double>(n);
  ValueGrad out;
  out.value = w.lambda * cfg.rho + pairwise_sum(values) * inv_n;
  out.grad.g_theta.resize(q - 1);
  for (std::size_t j = 0; j + 1 < q; ++j) out.grad.g_theta[j] = sum[j] * inv_n;
  out.grad.g_lambda = cfg.rho + sum[q - 1] * inv_n;
  return out;
}

GradPair full_gradient(const LossModel& model, const ParamPoint& w, const Dataset& data, const NoiseBank& bank,
                       const CostParams& cp, const RobustnessConfig& cfg) {
  return full_value_and_gradient(model, w, data, bank, cp, cfg).grad;
}

ConcentrationReport concentration_report(const ExponentTable& table, double beta, double eta) {
  if (!(eta > 0.0)) throw ValidationError("concentration_report: eta must be positive");
  const SoftmaxWeights sw = softmax_weights(table, beta);
  std::vector<double> top(table.size(), 0.0);
  std::vector<double> ent(table.size(), 0.0);
  std::vector<double> sq(table.size(), 0.0);
  for (std::size_t l = 0; l < table.size(); ++l) {
    const double w = sw.w[l];
    if (table.h[l] >= table.h_max - eta) top[l] = w;
    if (w > 0.0) ent[l] = -w * std::log(w);
    sq[l] = w * w;
  }
  ConcentrationReport r;
  r.mass_on_eta_argmax = pairwise_sum(top);
  r.weight_entropy = pairwise_sum(ent);
  r.ess = 1.0 / pairwise_sum(sq);
  return r;
}

}  // namespace wdro
