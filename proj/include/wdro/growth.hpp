#ifndef WDRO_GROWTH_HPP
#define WDRO_GROWTH_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wdro/losses.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// Constants with f(theta, zeta) <= mu + (lambda_growth / 2) c(xi, zeta) for
/// every theta in the box and every zeta.
struct GrowthCert {
  double mu = 0.0;
  double lambda_growth = 0.0;
  Sample sample;
};

struct CertOptions {
  /// lambda_xi for losses that are Lipschitz in x (any positive value is
  /// admissible there). Ignored for linear regression.
  std::optional<double> requested_lambda;
  int num_labels = 1;
  std::size_t probes = 10000;
  /// Probe radii reach 10 * data_scale from the certified sample.
  double data_scale = 1.0;
  std::uint64_t seed = 0x5eed;
  double tol = 1e-9;
};

/// Analytic certificate, validated on a probe cloud before it is returned.
///   linreg:   lambda = 4 max|theta|^2,  mu = 2 max (<theta, x> - t)^2
///   Lipschitz-in-x losses with bound L over the box and requested lambda:
///             mu = max_{theta, y'} f(theta, x, y') + L^2 / lambda
/// Throws ContractError if a probe violates the growth inequality.
GrowthCert growth_certificate(const LossModel& model, const Sample& xi, const ParamBox& box, const CostParams& cp,
                              const CertOptions& options);

/// Checks f(theta, zeta) <= mu + (lambda/2) c(xi, zeta) + tol (1 + |mu|) on
/// options.probes random (theta, zeta) pairs plus box corners and zeta = xi.
/// Throws ContractError naming the first violating probe.
void validate_certificate(const LossModel& model, const GrowthCert& cert, const ParamBox& box, const CostParams& cp,
                          const CertOptions& options);

/// lambda_min = max_i lambda_{xi_i}.
double lambda_min_for_dataset(std::span<const GrowthCert> certs);

}  // namespace wdro

#endif  // WDRO_GROWTH_HPP
