#ifndef WDRO_SMOOTHING_HPP
#define WDRO_SMOOTHING_HPP

#include <span>
#include <vector>

#include "wdro/losses.hpp"
#include "wdro/noise_bank.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// h_l = f(theta, x + omega_l, z_l) - lambda (|omega_l|^2 + kappa 1[y != z_l])
/// for one (theta, lambda, xi), with h_max = max_l h_l.
struct ExponentTable {
  std::vector<double> h;
  double h_max = 0.0;
  /// |omega_l|^2 + kappa 1[y != z_l], straight from the bank.
  std::vector<double> transport;
  /// Row-major m x p array of grad_theta f(theta, x + omega_l, z_l); empty
  /// unless gradients were requested.
  std::vector<double> grad_theta;
  std::size_t p = 0;

  std::size_t size() const { return h.size(); }
  /// Table from raw exponents (no transport or gradient columns).
  static ExponentTable from_values(std::vector<double> h);
};

ExponentTable exponent_table(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                             const NoiseBank& bank, const CostParams& cp, bool with_gradients = false);

/// h_max + beta log((1/m) sum_l exp((h_l - h_max) / beta)). Satisfies
/// h_max - beta log m <= phi <= h_max.
double phi_beta_m(const ExponentTable& table, double beta);

/// w_l proportional to exp(h_l / beta), computed from the shifted exponents.
struct SoftmaxWeights {
  std::vector<double> w;
};
SoftmaxWeights softmax_weights(const ExponentTable& table, double beta);

struct GradPair {
  std::vector<double> g_theta;
  double g_lambda = 0.0;

  std::vector<double> flat() const;
};

struct ValueGrad {
  double value = 0.0;
  GradPair grad;
};

/// lambda rho + phi^{beta,m}_xi and its gradient
///   g_theta  = sum_l w_l grad_theta f(theta, x + omega_l, z_l)
///   g_lambda = rho - sum_l w_l (|omega_l|^2 + kappa 1[y != z_l]).
ValueGrad sample_value_and_grad(const LossModel& model, std::span<const double> theta, double lambda,
                                const Sample& xi, const NoiseBank& bank, const CostParams& cp,
                                const RobustnessConfig& cfg);

GradPair grad_pair(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                   const NoiseBank& bank, const CostParams& cp, const RobustnessConfig& cfg);

/// F^{beta,m}(theta, lambda) = lambda rho + (1/n) sum_i phi^{beta,m}_{xi_i}.
double objective_F(const LossModel& model, const ParamPoint& w, const Dataset& data, const NoiseBank& bank,
                   const CostParams& cp, const RobustnessConfig& cfg);

/// Value and gradient of F^{beta,m}. Per-sample work runs on the worker
/// pool; the reduction over samples is pairwise in index order.
ValueGrad full_value_and_gradient(const LossModel& model, const ParamPoint& w, const Dataset& data,
                                  const NoiseBank& bank, const CostParams& cp, const RobustnessConfig& cfg);

GradPair full_gradient(const LossModel& model, const ParamPoint& w, const Dataset& data, const NoiseBank& bank,
                       const CostParams& cp, const RobustnessConfig& cfg);

struct ConcentrationReport {
  double mass_on_eta_argmax = 0.0;  // sum of w_l over {h_l >= h_max - eta}
  double weight_entropy = 0.0;      // -sum w_l log w_l
  double ess = 0.0;                 // 1 / sum w_l^2
};
ConcentrationReport concentration_report(const ExponentTable& table, double beta, double eta);

}  // namespace wdro

#endif  // WDRO_SMOOTHING_HPP
