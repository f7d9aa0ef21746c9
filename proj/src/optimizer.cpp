#include "wdro/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

#include "wdro/cost.hpp"
#include "wdro/error.hpp"
#include "wdro/rng.hpp"
#include "wdro/smoothing.hpp"

namespace wdro {

void StepSchedule::validate() const {
  if (!std::isfinite(alpha0) || alpha0 < 0.0 || (alpha0 == 0.0 && !allow_zero)) {
    throw ValidationError("schedule: alpha0 must be positive");
  }
  if (!(k0 > 0.0) || !std::isfinite(k0)) throw ValidationError("schedule: k0 must be positive");
}

void check_lambda_contract(const ParamBox& box, std::span<const GrowthCert> certs) {
  for (std::size_t i = 0; i < certs.size(); ++i) {
    if (certs[i].lambda_growth > box.lambda_min) {
      std::ostringstream os;
      os.precision(10);
      os << "lambda_min contract violated: box lambda_min = " << box.lambda_min << " is below the certificate of sample "
         << i << " (lambda_xi = " << certs[i].lambda_growth << ", mu = " << certs[i].mu << ")";
      throw ContractError(os.str());
    }
  }
}

namespace {

double theta_norm(const ParamPoint& w) { return std::sqrt(squared_norm(w.theta)); }

void guard(const ParamPoint& w, std::size_t k) {
  bool ok = std::isfinite(w.lambda);
  for (double v : w.theta) ok = ok && std::isfinite(v);
  if (!ok) throw NumericError("non-finite iterate at k=" + std::to_string(k));
}

enum class Method { sgd, gd };

RunRecord run(Method method, const LossModel& model, const Dataset& data, const NoiseBank& bank,
              const ParamBox& box, const CostParams& cp, const RobustnessConfig& cfg, const StepSchedule& schedule,
              std::span<const GrowthCert> certs, const RunOptions& opt, const SeedBundle& seeds) {
  box.validate();
  cp.validate();
  cfg.validate();
  schedule.validate();
  if (opt.iterations < 1) throw ValidationError("iteration budget must be >= 1");
  if (opt.eval_every < 1) throw ValidationError("eval_every must be >= 1");
  if (opt.thin < 1) throw ValidationError("thinning stride must be >= 1");
  if (box.param_dim() != model.param_dim()) throw ValidationError("box dimension does not match the model");
  check_lambda_contract(box, certs);

  RunRecord rec;
  rec.method = method == Method::sgd ? "sgd" : "gd";
  rec.seeds = seeds;

  ParamPoint w;
  if (opt.init) {
    if (opt.init->theta.size() != model.param_dim()) throw ValidationError("init has the wrong dimension");
    w = project_box(*opt.init, box);
  } else {
    w.theta.assign(model.param_dim(), 0.0);
    w.lambda = 0.5 * (box.lambda_min + box.lambda_max);
    w = project_box(w, box);
  }

  Stream index_rng(seeds.index);
  const std::size_t K = opt.iterations;
  const std::size_t tail = std::max<std::size_t>(1, (K + 99) / 100);
  std::deque<Iterate> recent;
  auto keep = [&](std::size_t k, const ParamPoint& p) {
    if (opt.full_trace || k % opt.thin == 0) {
      rec.iterates.push_back({k, p});
    } else {
      recent.push_back({k, p});
    }
    while (!recent.empty() && recent.front().k + tail <= k) recent.pop_front();
  };
  auto evaluate = [&](std::size_t k) {
    const ValueGrad vg = full_value_and_gradient(model, w, data, bank, cp, cfg);
    auto g = vg.grad.flat();
    auto x = w.flat();
    std::vector<double> moved(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) moved[j] = x[j] - opt.probe_step * g[j];
    const ParamPoint pr = project_box(ParamPoint::from_flat(moved), box);
    const double res = distance(pr, w) / opt.probe_step;
    if (!std::isfinite(vg.value) || !std::isfinite(res)) {
      throw NumericError("non-finite objective or residual at k=" + std::to_string(k));
    }
    rec.trace.push_back({k, vg.value, res, w.lambda, theta_norm(w)});
    return res;
  };

  keep(0, w);
  std::size_t k = 0;
  for (; k < K; ++k) {
    if (k % opt.eval_every == 0) {
      const double res = evaluate(k);
      if (opt.residual_tol && res <= *opt.residual_tol) {
        rec.residual_hit = k;
        break;
      }
    }
    GradPair g;
    if (method == Method::sgd) {
      const std::size_t i = static_cast<std::size_t>(index_rng.below(data.size()));
      g = grad_pair(model, w.theta, w.lambda, data[i], bank, cp, cfg);
    } else {
      g = full_gradient(model, w, data, bank, cp, cfg);
    }
    const double a = schedule(k);
    for (std::size_t j = 0; j < w.theta.size(); ++j) w.theta[j] -= a * g.g_theta[j];
    w.lambda -= a * g.g_lambda;
    guard(w, k + 1);
    w = project_box(w, box);
    keep(k + 1, w);
  }
  rec.iterations_run = k;
  if (rec.trace.empty() || rec.trace.back().k != k) {
    const double res = evaluate(k);
    if (opt.residual_tol && res <= *opt.residual_tol && !rec.residual_hit) rec.residual_hit = k;
  }
  for (auto& it : recent) {
    if (it.k % opt.thin != 0) rec.iterates.push_back(std::move(it));
  }
  std::sort(rec.iterates.begin(), rec.iterates.end(), [](const Iterate& a, const Iterate& b) { return a.k < b.k; });
  rec.final_point = w;
  rec.final_residual = rec.trace.back().residual;
  return rec;
}

}  // namespace

RunRecord sgd_run(const LossModel& model, const Dataset& data, const NoiseBank& bank, const ParamBox& box,
                  const CostParams& cp, const RobustnessConfig& cfg, const StepSchedule& schedule,
                  std::span<const GrowthCert> certs, const RunOptions& options, const SeedBundle& seeds) {
  return run(Method::sgd, model, data, bank, box, cp, cfg, schedule, certs, options, seeds);
}

RunRecord full_gd_run(const LossModel& model, const Dataset& data, const NoiseBank& bank, const ParamBox& box,
                      const CostParams& cp, const RobustnessConfig& cfg, const StepSchedule& schedule,
                      std::span<const GrowthCert> certs, const RunOptions& options, const SeedBundle& seeds) {
  return run(Method::gd, model, data, bank, box, cp, cfg, schedule, certs, options, seeds);
}

double criticality_residual(const LossModel& model, const ParamPoint& w, const Dataset& data, const NoiseBank& bank,
                            const ParamBox& box, const CostParams& cp, const RobustnessConfig& cfg,
                            double probe_step) {
  if (!(probe_step > 0.0)) throw ValidationError("criticality_residual: probe_step must be positive");
  const auto g = full_gradient(model, w, data, bank, cp, cfg).flat();
  auto x = w.flat();
  for (std::size_t j = 0; j < x.size(); ++j) x[j] -= probe_step * g[j];
  return distance(project_box(ParamPoint::from_flat(x), box), w) / probe_step;
}

CertReport certify_run(const RunRecord& record, std::span<const ParamPoint> crit_points, double eps) {
  if (crit_points.empty()) throw ValidationError("certify_run: oracle critical set is empty");
  if (record.iterates.empty()) throw ValidationError("certify_run: record has no iterates");
  const double K = static_cast<double>(record.iterates.back().k);
  CertReport r;
  r.eps = eps;
  for (const auto& it : record.iterates) {
    if (static_cast<double>(it.k) < 0.9 * K) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : crit_points) best = std::min(best, distance(it.w, c));
    r.tail_distance = std::max(r.tail_distance, best);
    ++r.tail_count;
  }
  r.pass = r.tail_distance <= eps;
  return r;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_csv(const RunRecord& record) {
  std::string out = "k,objective,residual,lambda,theta_norm\n";
  for (const auto& t : record.trace) {
    out += std::to_string(t.k) + ',' + fmt17(t.objective) + ',' + fmt17(t.residual) + ',' + fmt17(t.lambda) + ',' +
           fmt17(t.theta_norm) + '\n';
  }
  return out;
}

std::string iterates_csv(const RunRecord& record) {
  std::string out = "k";
  const std::size_t p = record.final_point.theta.size();
  for (std::size_t j = 0; j < p; ++j) out += ",theta_" + std::to_string(j + 1);
  out += ",lambda\n";
  for (const auto& it : record.iterates) {
    out += std::to_string(it.k);
    for (double v : it.w.theta) out += ',' + fmt17(v);
    out += ',' + fmt17(it.w.lambda) + '\n';
  }
  return out;
}

nlohmann::json record_summary(const RunRecord& record) {
  nlohmann::json j;
  j["method"] = record.method;
  j["iterations_run"] = record.iterations_run;
  j["residual_hit"] = record.residual_hit ? nlohmann::json(*record.residual_hit) : nlohmann::json(nullptr);
  j["final_residual"] = fmt17(record.final_residual);
  std::vector<std::string> fp;
  for (double v : record.final_point.flat()) fp.push_back(fmt17(v));
  j["final_point"] = fp;
  return j;
}

}  // namespace wdro
