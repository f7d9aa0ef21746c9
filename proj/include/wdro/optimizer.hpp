#ifndef WDRO_OPTIMIZER_HPP
#define WDRO_OPTIMIZER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/growth.hpp"
#include "wdro/losses.hpp"
#include "wdro/noise_bank.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// alpha_k = alpha0 / (1 + k / k0).
struct StepSchedule {
  double alpha0 = 0.1;
  double k0 = 100.0;
  /// Permits alpha0 = 0 (frozen iterates). Tests only.
  bool allow_zero = false;

  double operator()(std::size_t k) const { return alpha0 / (1.0 + static_cast<double>(k) / k0); }
  void validate() const;
};

struct SeedBundle {
  std::uint64_t bank = 0;
  std::uint64_t index = 0;
};

struct TracePoint {
  std::size_t k = 0;
  double objective = 0.0;
  double residual = 0.0;
  double lambda = 0.0;
  double theta_norm = 0.0;
};

struct Iterate {
  std::size_t k = 0;
  ParamPoint w;
};

struct RunOptions {
  std::size_t iterations = 1000;
  /// Full-bank objective and residual every eval_every iterations.
  std::size_t eval_every = 100;
  /// Stop at the first evaluation whose residual is <= this.
  std::optional<double> residual_tol;
  /// Keep every thin-th iterate plus the final 1%; full_trace keeps all.
  std::size_t thin = 10;
  bool full_trace = false;
  double probe_step = 1.0;
  std::optional<ParamPoint> init;  // default: projection of (0, box midpoint in lambda)
};

struct RunRecord {
  std::string method;  // "sgd" | "gd"
  std::vector<Iterate> iterates;
  std::vector<TracePoint> trace;
  SeedBundle seeds;
  nlohmann::json config;
  std::size_t iterations_run = 0;
  std::optional<std::size_t> residual_hit;  // k of the first evaluation below residual_tol
  ParamPoint final_point;
  double final_residual = 0.0;
};

/// Refuses a box whose lambda_min lies below some certificate's lambda_xi.
void check_lambda_contract(const ParamBox& box, std::span<const GrowthCert> certs);

/// Projected SGD: w_{k+1} = Proj(w_k - alpha_k grad_pair(w_k, xi_{i_k})), i_k
/// uniform from a Stream seeded with seeds.index.
RunRecord sgd_run(const LossModel& model, const Dataset& data, const NoiseBank& bank, const ParamBox& box,
                  const CostParams& cp, const RobustnessConfig& cfg, const StepSchedule& schedule,
                  std::span<const GrowthCert> certs, const RunOptions& options, const SeedBundle& seeds);

/// Projected descent with the full gradient of F^{beta,m}.
RunRecord full_gd_run(const LossModel& model, const Dataset& data, const NoiseBank& bank, const ParamBox& box,
                      const CostParams& cp, const RobustnessConfig& cfg, const StepSchedule& schedule,
                      std::span<const GrowthCert> certs, const RunOptions& options, const SeedBundle& seeds);

/// |w - Proj(w - s grad F^{beta,m}(w))| / s.
double criticality_residual(const LossModel& model, const ParamPoint& w, const Dataset& data, const NoiseBank& bank,
                            const ParamBox& box, const CostParams& cp, const RobustnessConfig& cfg,
                            double probe_step = 1.0);

struct CertReport {
  double tail_distance = 0.0;
  std::size_t tail_count = 0;
  double eps = 0.0;
  bool pass = false;
};

/// max over iterates with k >= 0.9 K (K the last recorded k) of the distance
/// to the nearest oracle critical point; passes when <= eps.
CertReport certify_run(const RunRecord& record, std::span<const ParamPoint> crit_points, double eps);

/// "%.17g"
std::string fmt17(double v);
/// k,objective,residual,lambda,theta_norm
std::string trace_csv(const RunRecord& record);
/// k,theta_1..theta_p,lambda
std::string iterates_csv(const RunRecord& record);
nlohmann::json record_summary(const RunRecord& record);

}  // namespace wdro

#endif  // WDRO_OPTIMIZER_HPP
