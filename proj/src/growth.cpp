#include "wdro/growth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wdro/cost.hpp"
#include "wdro/error.hpp"
#include "wdro/rng.hpp"

namespace wdro {
namespace {

std::string format_vec(std::span<const double> v) {
  std::ostringstream os;
  os.precision(6);
  os << '[';
  for (std::size_t j = 0; j < v.size(); ++j) os << (j ? ", " : "") << v[j];
  os << ']';
  return os.str();
}

}  // namespace

GrowthCert growth_certificate(const LossModel& model, const Sample& xi, const ParamBox& box, const CostParams& cp,
                              const CertOptions& options) {
  if (box.param_dim() != model.param_dim()) throw ValidationError("growth_certificate: box dimension mismatch");
  GrowthCert cert;
  cert.sample = xi;
  if (!model.lipschitz_in_x()) {
    const double r = box.max_theta_norm();
    cert.lambda_growth = 4.0 * r * r;
    cert.mu = 2.0 * model.value_range(box, xi.x, xi.y, xi.target).hi;
  } else {
    if (!options.requested_lambda || !(*options.requested_lambda > 0.0)) {
      throw ValidationError(model.key() + ": growth certificate needs a positive requested lambda");
    }
    const double lam = *options.requested_lambda;
    const double L = model.lipschitz_x_bound(box);
    double top = -std::numeric_limits<double>::infinity();
    for (int y = 1; y <= std::max(options.num_labels, xi.y); ++y) {
      top = std::max(top, model.value_range(box, xi.x, y, xi.target).hi);
    }
    cert.lambda_growth = lam;
    cert.mu = top + L * L / lam;
  }
  validate_certificate(model, cert, box, cp, options);
  return cert;
}

void validate_certificate(const LossModel& model, const GrowthCert& cert, const ParamBox& box, const CostParams& cp,
                          const CertOptions& options) {
  const Sample& xi = cert.sample;
  const std::size_t p = model.param_dim();
  const std::size_t d = xi.x.size();
  const int J = std::max(options.num_labels, xi.y);
  Stream rng(options.seed);

  std::vector<double> theta(p);
  std::vector<double> zeta(d);
  std::vector<double> dir(d);
  const double slack = options.tol * (1.0 + std::abs(cert.mu));

  auto check = [&](std::size_t probe, int z) {
    const double f = model.value(theta, zeta, z, xi.target);
    const double bound = cert.mu + 0.5 * cert.lambda_growth * mixed_cost(xi.x, xi.y, zeta, z, cp);
    if (!(f <= bound + slack)) {
      std::ostringstream os;
      os.precision(10);
      os << "growth certificate rejected at probe " << probe << ": theta=" << format_vec(theta)
         << " zeta=(" << format_vec(zeta) << ", " << z << ") f=" << f << " > mu + (lambda/2)c = " << bound;
      throw ContractError(os.str());
    }
  };

  for (std::size_t k = 0; k < options.probes; ++k) {
    // Every fourth probe uses a box corner, the rest are uniform in the box.
    for (std::size_t j = 0; j < p; ++j) {
      const double u = (k % 4 == 0) ? static_cast<double>(rng.below(2)) : rng.uniform();
      theta[j] = box.theta_lo[j] + u * (box.theta_hi[j] - box.theta_lo[j]);
    }
    if (k == 0) {
      std::copy(xi.x.begin(), xi.x.end(), zeta.begin());
      check(k, xi.y);
      continue;
    }
    double nrm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    const double radius = 10.0 * options.data_scale * rng.uniform();
    for (std::size_t j = 0; j < d; ++j) zeta[j] = xi.x[j] + radius * dir[j] / (nrm > 0.0 ? nrm : 1.0);
    const int z = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(J)));
    check(k, z);
  }
}

double lambda_min_for_dataset(std::span<const GrowthCert> certs) {
  if (certs.empty()) throw ValidationError("lambda_min_for_dataset: empty certificate list");
  double m = 0.0;
  for (const auto& c : certs) m = std::max(m, c.lambda_growth);
  return m;
}

}  // namespace wdro
