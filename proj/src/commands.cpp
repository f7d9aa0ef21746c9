#include "wdro/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "wdro/cost.hpp"
#include "wdro/error.hpp"
#include "wdro/oracle.hpp"
#include "wdro/optimizer.hpp"
#include "wdro/parallel.hpp"
#include "wdro/rng.hpp"

namespace wdro {
namespace {

using nlohmann::json;

constexpr double kLawTol = 1e-10;

json seeds_json(const SeedBundle& s) { return {{"bank", s.bank}, {"index", s.index}}; }

std::string point_cells(const ParamPoint& w) {
  std::string out;
  for (double v : w.theta) out += fmt17(v) + ',';
  return out + fmt17(w.lambda);
}

std::string point_header(std::size_t p) {
  std::string out;
  for (std::size_t j = 0; j < p; ++j) out += "theta_" + std::to_string(j + 1) + ',';
  return out + "lambda";
}

json derived_json(const Setup& s) {
  json certs = json::array();
  for (const auto& c : s.certs) certs.push_back({{"mu", fmt17(c.mu)}, {"lambda_xi", fmt17(c.lambda_growth)}});
  return {{"lambda_min_computed", fmt17(s.lambda_min_computed)},
          {"lambda_min", fmt17(s.box.lambda_min)},
          {"lambda_max", fmt17(s.box.lambda_max)},
          {"sigma2", fmt17(*s.config.sigma2)},
          {"certificates", certs}};
}

// Assembles record.json last so it can list the other outputs.
CommandResult finish(const std::string& command, const Setup& s, Artifacts files, json verdicts, bool pass,
                     const std::string& message) {
  json rec;
  rec["command"] = command;
  rec["loss"] = s.config.loss;
  rec["config"] = config_to_json(s.config);
  rec["seeds"] = seeds_json(s.config.seeds);
  rec["derived"] = derived_json(s);
  json outs = json::array();
  for (const auto& [name, _] : files) outs.push_back(name);
  rec["outputs"] = outs;
  rec["verdicts"] = std::move(verdicts);
  rec["pass"] = pass;
  files["record.json"] = rec.dump(2) + "\n";
  return {pass ? 0 : 1, std::move(files), message};
}

std::vector<std::vector<double>> axes_for(const ParamBox& box, std::span<const std::size_t> res) {
  std::vector<std::vector<double>> axes;
  const std::size_t q = box.param_dim() + 1;
  for (std::size_t j = 0; j < q; ++j) {
    const double lo = j + 1 < q ? box.theta_lo[j] : box.lambda_min;
    const double hi = j + 1 < q ? box.theta_hi[j] : box.lambda_max;
    const std::size_t n = lo == hi ? 1 : res[j];
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    if (n > 1) a.back() = hi;
    axes.push_back(std::move(a));
  }
  return axes;
}

// Same ordering as crit_set_grid: last coordinate (lambda) fastest.
std::vector<ParamPoint> grid_points(const ParamBox& box, std::span<const std::size_t> res) {
  const auto axes = axes_for(box, res);
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  if (total > 5'000'000) throw ValidationError("parameter grid has more than 5e6 points");
  std::vector<ParamPoint> pts;
  pts.reserve(total);
  std::vector<double> x(axes.size());
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    for (std::size_t j = axes.size(); j-- > 0;) {
      x[j] = axes[j][r % axes[j].size()];
      r /= axes[j].size();
    }
    pts.push_back(ParamPoint::from_flat(x));
  }
  return pts;
}

std::vector<std::size_t> broadcast(const std::vector<std::size_t>& v, std::size_t q, std::size_t fallback) {
  if (v.empty()) return std::vector<std::size_t>(q, fallback);
  if (v.size() == 1) return std::vector<std::size_t>(q, v[0]);
  if (v.size() != q) throw ValidationError("grid resolution needs 1 or " + std::to_string(q) + " entries");
  return v;
}

double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 1.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    num = std::max(num, std::abs(a[j] - b[j]));
    den = std::max(den, std::abs(b[j]));
  }
  return num / den;
}

std::vector<double> fd_gradient(const std::function<double(const ParamPoint&)>& f, const ParamPoint& w, double step) {
  auto x = w.flat();
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x[j]));
    const double keep = x[j];
    x[j] = keep + h;
    const double up = f(ParamPoint::from_flat(x));
    x[j] = keep - h;
    const double down = f(ParamPoint::from_flat(x));
    x[j] = keep;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

ObjectiveOracle make_oracle(const Setup& s) {
  if (!s.config.oracle.enabled) {
    throw ValidationError("the brute-force oracle is disabled; pass --enable-oracle or set oracle.enabled");
  }
  std::vector<CompactWindow> windows;
  for (const auto& c : s.certs) windows.push_back(compact_window(c, *s.model, s.box, s.cp, s.data.num_labels()));
  BruteForceOptions bo;
  bo.grid = s.config.oracle.grid;
  bo.top_k = s.config.oracle.top_k;
  bo.tol_argmax = s.config.oracle.argmax_tol;
  return ObjectiveOracle(*s.model, s.data, std::move(windows), s.cp, s.robust.rho, bo);
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

json opt_number(std::optional<double> v) { return v ? json(fmt17(*v)) : json(nullptr); }

}  // namespace

Setup build_setup(const RunConfig& config) {
  config.validate();
  Setup s;
  s.config = config;
  RunConfig& c = s.config;

  if (c.dataset.path) {
    s.data = load_dataset(*c.dataset.path, c.dataset.schema);
  } else {
    int J = 1;
    for (const auto& r : c.dataset.rows) J = std::max(J, r.y);
    s.data = Dataset(c.dataset.rows, c.dataset.num_labels ? *c.dataset.num_labels : J);
  }
  c.dataset.path.reset();
  c.dataset.rows = s.data.samples();
  c.dataset.num_labels = s.data.num_labels();

  s.model = make_loss(c.loss, s.data.dim(), c.architecture);
  const std::size_t p = s.model->param_dim();
  if (c.theta_lo.empty() || c.theta_hi.empty()) throw ValidationError("box: theta_lo and theta_hi are required");
  if (c.theta_lo.size() == 1) c.theta_lo.assign(p, c.theta_lo[0]);
  if (c.theta_hi.size() == 1) c.theta_hi.assign(p, c.theta_hi[0]);
  if (c.theta_lo.size() != p || c.theta_hi.size() != p) {
    throw ValidationError("box: theta bounds have " + std::to_string(c.theta_lo.size()) + " entries, the " + c.loss +
                          " model has " + std::to_string(p) + " parameters");
  }
  if (c.init && c.init->theta.size() != p) throw ValidationError("init.theta has the wrong length");

  const auto median = median_pairwise_distance(s.data);
  if (!c.sigma2) c.sigma2 = (median && *median > 0.0) ? 0.25 * *median * *median : 1.0;

  s.cp.kappa = c.kappa;
  s.robust = {c.rho, c.beta};

  ParamBox theta_box;
  theta_box.theta_lo = c.theta_lo;
  theta_box.theta_hi = c.theta_hi;
  theta_box.lambda_min = 1.0;
  theta_box.lambda_max = 1.0;
  theta_box.validate();

  CertOptions co;
  co.num_labels = s.data.num_labels();
  co.probes = c.cert_probes;
  co.data_scale = std::max(1.0, median.value_or(1.0));
  if (s.model->lipschitz_in_x()) {
    if (!c.cert_lambda) c.cert_lambda = c.lambda_max ? 0.1 * *c.lambda_max : 0.1;
    co.requested_lambda = c.cert_lambda;
  } else {
    c.cert_lambda.reset();
  }
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    co.seed = splitmix64(c.seeds.bank + 0x9E37 * (i + 1));
    s.certs.push_back(growth_certificate(*s.model, s.data[i], theta_box, s.cp, co));
  }
  s.lambda_min_computed = lambda_min_for_dataset(s.certs);
  if (!(s.lambda_min_computed > 0.0)) {
    throw ContractError("computed lambda_min is 0 (degenerate theta box); widen the box or set box.lambda_min");
  }
  if (c.lambda_min && *c.lambda_min < s.lambda_min_computed) {
    std::ostringstream os;
    os.precision(10);
    os << "box.lambda_min = " << *c.lambda_min << " is below the certified lambda_min = " << s.lambda_min_computed;
    throw ContractError(os.str());
  }
  if (!c.lambda_min) c.lambda_min = s.lambda_min_computed;
  if (!c.lambda_max) c.lambda_max = 100.0 * *c.lambda_min;
  if (*c.lambda_max <= *c.lambda_min) {
    std::ostringstream os;
    os.precision(10);
    os << "box.lambda_max = " << *c.lambda_max << " is not above lambda_min = " << *c.lambda_min
       << " required by the growth certificates";
    throw ContractError(os.str());
  }
  s.box = theta_box;
  s.box.lambda_min = *c.lambda_min;
  s.box.lambda_max = *c.lambda_max;
  s.box.validate();
  check_lambda_contract(s.box, s.certs);
  return s;
}

NoiseBank make_bank(const Setup& s, std::size_t m) {
  return sample_noise_bank(m, s.data.dim(), s.data.num_labels(), *s.config.sigma2, s.config.seeds.bank);
}

CommandResult cmd_train(const RunConfig& config) {
  const Setup s = build_setup(config);
  const RunConfig& c = s.config;
  const NoiseBank bank = make_bank(s, c.m);
  RunOptions opt;
  opt.iterations = c.iterations;
  opt.eval_every = c.eval_every;
  opt.residual_tol = c.residual_tol;
  opt.thin = c.thin;
  opt.full_trace = c.full_trace;
  opt.init = c.init;
  const RunRecord rec = sgd_run(*s.model, s.data, bank, s.box, s.cp, s.robust, c.schedule, s.certs, opt, c.seeds);

  Artifacts files;
  files["trace.csv"] = trace_csv(rec);
  files["iterates.csv"] = iterates_csv(rec);
  if (c.diagnostics) {
    std::vector<std::string> rows(s.data.size());
    parallel_for(s.data.size(), [&](std::size_t i) {
      const ExponentTable t =
          exponent_table(*s.model, rec.final_point.theta, rec.final_point.lambda, s.data[i], bank, s.cp, false);
      const ConcentrationReport r = concentration_report(t, c.beta, c.diagnostics_eta);
      rows[i] = std::to_string(i) + ',' + fmt17(t.h_max) + ',' + fmt17(phi_beta_m(t, c.beta)) + ',' +
                fmt17(r.mass_on_eta_argmax) + ',' + fmt17(r.weight_entropy) + ',' + fmt17(r.ess) + '\n';
    });
    std::string csv = "i,h_max,phi,mass,entropy,ess\n";
    for (const auto& r : rows) csv += r;
    files["diagnostics.csv"] = csv;
  }
  json verdicts = record_summary(rec);
  verdicts["final_objective"] = fmt17(rec.trace.back().objective);
  std::ostringstream msg;
  msg << "train: " << rec.iterations_run << " iterations, final residual " << fmt17(rec.final_residual);
  return finish("train", s, std::move(files), std::move(verdicts), true, msg.str());
}

CommandResult cmd_check_gradients(const RunConfig& config, const GradientHook& hook) {
  if (config.probes.count == 0) throw ValidationError("check-gradients: probes.count must be >= 1");
  const Setup s = build_setup(config);
  const RunConfig& c = s.config;
  const NoiseBank bank = make_bank(s, c.m);
  const std::size_t q = s.model->param_dim() + 1;

  // Probe points and sample indices are drawn up front so the report does
  // not depend on the worker count.
  Stream rng(c.seeds.index);
  std::vector<ParamPoint> points(c.probes.count);
  std::vector<std::size_t> picks(c.probes.count);
  for (std::size_t k = 0; k < c.probes.count; ++k) {
    ParamPoint& w = points[k];
    w.theta.resize(q - 1);
    for (std::size_t j = 0; j + 1 < q; ++j) {
      w.theta[j] = s.box.theta_lo[j] + (s.box.theta_hi[j] - s.box.theta_lo[j]) * rng.uniform();
    }
    w.lambda = s.box.lambda_min + (s.box.lambda_max - s.box.lambda_min) * rng.uniform();
    picks[k] = static_cast<std::size_t>(rng.below(s.data.size()));
  }
  std::vector<double> err_pair(c.probes.count), err_full(c.probes.count);
  parallel_for(c.probes.count, [&](std::size_t k) {
    const ParamPoint& w = points[k];
    const Sample& xi = s.data[picks[k]];
    GradPair gp = grad_pair(*s.model, w.theta, w.lambda, xi, bank, s.cp, s.robust);
    if (hook) hook(gp);
    const auto fd_pair = fd_gradient(
        [&](const ParamPoint& v) {
          return sample_value_and_grad(*s.model, v.theta, v.lambda, xi, bank, s.cp, s.robust).value;
        },
        w, c.probes.fd_step);
    err_pair[k] = rel_err(gp.flat(), fd_pair);
    GradPair gf = full_gradient(*s.model, w, s.data, bank, s.cp, s.robust);
    if (hook) hook(gf);
    const auto fd_full = fd_gradient(
        [&](const ParamPoint& v) { return objective_F(*s.model, v, s.data, bank, s.cp, s.robust); }, w,
        c.probes.fd_step);
    err_full[k] = rel_err(gf.flat(), fd_full);
  });
  std::string gcsv = "probe,sample," + point_header(q - 1) + ",rel_err_pair,rel_err_full\n";
  double max_err = 0.0;
  for (std::size_t k = 0; k < c.probes.count; ++k) {
    gcsv += std::to_string(k) + ',' + std::to_string(picks[k]) + ',' + point_cells(points[k]) + ',' +
            fmt17(err_pair[k]) + ',' + fmt17(err_full[k]) + '\n';
    max_err = std::max({max_err, err_pair[k], err_full[k]});
  }
  const bool grad_ok = max_err <= c.probes.tolerance;

  // Finite-sample laws on random exponent tables: the sandwich
  // h_max - beta log m <= phi <= h_max, and phi nonincreasing in beta.
  Stream trng(splitmix64(c.seeds.index));
  std::string lcsv = "table,m,beta_lo,beta_hi,h_max,phi_lo,phi_hi,sandwich_ok,monotone_ok\n";
  std::size_t law_failures = 0;
  for (std::size_t t = 0; t < c.probes.tables; ++t) {
    const std::size_t m = 1 + static_cast<std::size_t>(trng.below(256));
    std::vector<double> h(m);
    const double scale = std::exp(std::log(1e-2) + trng.uniform() * std::log(1e4));
    for (auto& v : h) v = scale * trng.normal();
    if (t % 10 == 0 && m > 1) h[1] = *std::max_element(h.begin(), h.end());  // ties at the top
    const ExponentTable tab = ExponentTable::from_values(h);
    double b1 = std::exp(std::log(1e-4) + trng.uniform() * std::log(1e6));
    double b2 = std::exp(std::log(1e-4) + trng.uniform() * std::log(1e6));
    if (b1 > b2) std::swap(b1, b2);
    const double p1 = phi_beta_m(tab, b1), p2 = phi_beta_m(tab, b2);
    const double lm = std::log(static_cast<double>(m));
    const bool sandwich = p1 <= tab.h_max + kLawTol && p1 >= tab.h_max - b1 * lm - kLawTol &&
                          p2 <= tab.h_max + kLawTol && p2 >= tab.h_max - b2 * lm - kLawTol;
    const bool monotone = p1 >= p2 - kLawTol;
    if (!sandwich || !monotone) ++law_failures;
    lcsv += std::to_string(t) + ',' + std::to_string(m) + ',' + fmt17(b1) + ',' + fmt17(b2) + ',' + fmt17(tab.h_max) +
            ',' + fmt17(p1) + ',' + fmt17(p2) + ',' + (sandwich ? "1" : "0") + ',' + (monotone ? "1" : "0") + '\n';
  }

  // Softmax concentration on the exponent table of sample 0 at the box
  // center; beta runs from 10 gap down to 1e-4 gap.
  const ParamPoint mid = s.box.center();
  const ExponentTable tab = exponent_table(*s.model, mid.theta, mid.lambda, s.data[0], bank, s.cp, false);
  double second = -std::numeric_limits<double>::infinity();
  for (double v : tab.h) {
    if (v < tab.h_max) second = std::max(second, v);
  }
  std::string ccsv = "beta,mass,entropy,ess\n";
  bool conc_ok = true;
  json conc;
  if (std::isfinite(second) && std::count(tab.h.begin(), tab.h.end(), tab.h_max) == 1) {
    const double gap = tab.h_max - second;
    const double eta = 0.5 * gap;
    double prev = -1.0;
    for (double f : {10.0, 1.0, 0.1, 1e-2, 1e-3, 1e-4}) {
      const double b = f * gap;
      const ConcentrationReport r = concentration_report(tab, b, eta);
      if (r.mass_on_eta_argmax < prev - 1e-12) conc_ok = false;
      if (f <= 1e-3 && r.mass_on_eta_argmax < 0.99) conc_ok = false;
      prev = r.mass_on_eta_argmax;
      ccsv += fmt17(b) + ',' + fmt17(r.mass_on_eta_argmax) + ',' + fmt17(r.weight_entropy) + ',' + fmt17(r.ess) + '\n';
    }
    conc = {{"gap", fmt17(gap)}, {"eta", fmt17(eta)}, {"pass", conc_ok}};
  } else {
    conc = {{"skipped", "no distinct maximum in the table"}};
  }

  Artifacts files;
  files["gradients.csv"] = gcsv;
  files["laws.csv"] = lcsv;
  files["concentration.csv"] = ccsv;
  json verdicts = {{"max_rel_err", fmt17(max_err)},
                   {"tolerance", fmt17(c.probes.tolerance)},
                   {"gradients_pass", grad_ok},
                   {"law_tables", c.probes.tables},
                   {"law_failures", law_failures},
                   {"concentration", conc}};
  const bool pass = grad_ok && law_failures == 0 && conc_ok;
  std::ostringstream msg;
  msg << "check-gradients: max relative error " << fmt17(max_err) << " over " << c.probes.count << " probes ("
      << (grad_ok ? "ok" : "FAILED") << "), " << law_failures << " law failures";
  return finish("check-gradients", s, std::move(files), std::move(verdicts), pass, msg.str());
}

CommandResult cmd_sweep_beta(const RunConfig& config) {
  const Setup s = build_setup(config);
  const RunConfig& c = s.config;
  const auto betas = c.sweep.betas.empty() ? std::vector<double>{c.beta} : c.sweep.betas;
  const auto ms = c.sweep.ms.empty() ? std::vector<std::size_t>{c.m} : c.sweep.ms;
  const std::size_t m_ref = *std::max_element(ms.begin(), ms.end());
  const NoiseBank ref_bank = make_bank(s, m_ref);
  const std::size_t q = s.model->param_dim() + 1;
  const auto res = broadcast({c.sweep.grid}, q, c.sweep.grid);
  const auto pts = grid_points(s.box, res);

  std::optional<ObjectiveOracle> oracle;
  std::optional<LatticeField> field;
  if (c.oracle.enabled) {
    oracle.emplace(make_oracle(s));
    field.emplace(s.box, c.sweep.eps / 4.0, [&](const ParamPoint& w) { return oracle->subdiff(w); });
  }

  std::string csv = "beta,m,sup_gap,member_fraction\n";
  json cells = json::array();
  for (double b : betas) {
    const RobustnessConfig rc{c.rho, b};
    std::vector<std::vector<double>> ref(pts.size());
    parallel_for(pts.size(), [&](std::size_t k) {
      ref[k] = full_gradient(*s.model, pts[k], s.data, ref_bank, s.cp, rc).flat();
    });
    for (std::size_t m : ms) {
      const NoiseBank bank = ref_bank.prefix(m);
      std::vector<double> gaps(pts.size());
      std::vector<char> member(pts.size(), 0);
      parallel_for(pts.size(), [&](std::size_t k) {
        const auto g = m == m_ref ? ref[k] : full_gradient(*s.model, pts[k], s.data, bank, s.cp, rc).flat();
        gaps[k] = distance(g, ref[k]);
        if (field) {
          const ProbeGrid probes = probe_lattice(pts[k], c.sweep.eps, s.box, c.sweep.eps / 4.0);
          const LatticeField& lf = *field;
          const SubdiffField fn = [&lf](const ParamPoint& v) { return lf(v); };
          member[k] = enlargement_member(g, pts[k], c.sweep.eps, fn, probes) ? 1 : 0;
        }
      });
      const double gap = *std::max_element(gaps.begin(), gaps.end());
      json cell = {{"beta", fmt17(b)}, {"m", m}, {"sup_gap", fmt17(gap)}};
      csv += fmt17(b) + ',' + std::to_string(m) + ',' + fmt17(gap) + ',';
      if (field) {
        const double frac =
            static_cast<double>(std::count(member.begin(), member.end(), 1)) / static_cast<double>(pts.size());
        csv += fmt17(frac);
        cell["member_fraction"] = fmt17(frac);
      }
      csv += '\n';
      cells.push_back(cell);
    }
  }
  Artifacts files;
  files["sweep.csv"] = csv;
  json verdicts = {{"grid_points", pts.size()}, {"m_ref", m_ref}, {"eps", fmt17(c.sweep.eps)}, {"cells", cells}};
  return finish("sweep-beta", s, std::move(files), std::move(verdicts), true,
                "sweep-beta: " + std::to_string(betas.size() * ms.size()) + " cells over " +
                    std::to_string(pts.size()) + " grid points");
}

CommandResult cmd_certify_critical(const RunConfig& config) {
  const Setup s = build_setup(config);
  const RunConfig& c = s.config;
  const ObjectiveOracle oracle = make_oracle(s);
  const std::size_t q = s.model->param_dim() + 1;
  const auto res = broadcast(c.certify.grid, q, 41);
  const double smooth_tol = c.certify.smooth_tol.value_or(c.certify.tol);
  const double eps = c.certify.eps;

  const CritSet crit_f = crit_set_zoom([&](const ParamPoint& w) { return oracle.criticality(w, s.box); }, s.box, res,
                                       c.certify.tol, c.certify.zoom);
  std::string ocsv = point_header(q - 1) + ",residual\n";
  for (std::size_t k = 0; k < crit_f.points.size(); ++k) {
    ocsv += point_cells(crit_f.points[k]) + ',' + fmt17(crit_f.residuals[k]) + '\n';
  }

  const auto betas = sorted_unique(c.sweep.betas.empty() ? std::vector<double>{c.beta} : c.sweep.betas);
  const auto ms = sorted_unique(c.sweep.ms.empty() ? std::vector<std::size_t>{c.m} : c.sweep.ms);
  const NoiseBank full_bank = make_bank(s, ms.back());

  struct Cell {
    double beta;
    std::size_t m;
    std::size_t points = 0;
    double hausdorff = std::numeric_limits<double>::infinity();
    bool included = false;
    std::string note;
  };
  std::vector<Cell> cells;
  std::string scsv = "beta,m," + point_header(q - 1) + ",residual\n";
  for (double b : betas) {
    for (std::size_t m : ms) {
      Cell cell{b, m, 0, std::numeric_limits<double>::infinity(), false, {}};
      const NoiseBank bank = full_bank.prefix(m);
      const RobustnessConfig rc{c.rho, b};
      try {
        const CritSet cs = crit_set_zoom(
            [&](const ParamPoint& w) {
              return criticality_residual(*s.model, w, s.data, bank, s.box, s.cp, rc, 1.0);
            },
            s.box, res, smooth_tol, c.certify.zoom);
        cell.points = cs.points.size();
        cell.hausdorff = directed_hausdorff(cs.points, crit_f.points);
        cell.included = cell.hausdorff <= eps;
        for (std::size_t k = 0; k < cs.points.size(); ++k) {
          scsv += fmt17(b) + ',' + std::to_string(m) + ',' + point_cells(cs.points[k]) + ',' + fmt17(cs.residuals[k]) +
                  '\n';
        }
      } catch (const ValidationError& e) {
        cell.note = e.what();
      }
      cells.push_back(cell);
    }
  }
  auto find_cell = [&](double b, std::size_t m) -> const Cell& {
    for (const auto& cell : cells) {
      if (cell.beta == b && cell.m == m) return cell;
    }
    throw std::logic_error("missing sweep cell");
  };
  const Cell& extreme = find_cell(betas.front(), ms.back());
  std::optional<double> beta_bar;
  for (double b : betas) {
    if (!find_cell(b, ms.back()).included) break;
    beta_bar = b;
  }
  std::optional<std::size_t> m_bar;
  for (auto it = ms.rbegin(); it != ms.rend(); ++it) {
    if (!find_cell(betas.front(), *it).included) break;
    m_bar = *it;
  }
  std::string icsv = "beta,m,points,hausdorff,included\n";
  json jcells = json::array();
  for (const auto& cell : cells) {
    icsv += fmt17(cell.beta) + ',' + std::to_string(cell.m) + ',' + std::to_string(cell.points) + ',' +
            fmt17(cell.hausdorff) + ',' + (cell.included ? "1" : "0") + '\n';
    json jc = {{"beta", fmt17(cell.beta)},
               {"m", cell.m},
               {"points", cell.points},
               {"hausdorff", fmt17(cell.hausdorff)},
               {"included", cell.included}};
    if (!cell.note.empty()) jc["note"] = cell.note;
    jcells.push_back(jc);
  }

  // Projected SGD on the configured (beta, m), certified against crit F.
  const NoiseBank bank = make_bank(s, c.m);
  const std::vector<std::uint64_t> seeds =
      c.certify.sgd_seeds.empty() ? std::vector<std::uint64_t>{c.seeds.index} : c.certify.sgd_seeds;
  std::vector<RunRecord> runs(seeds.size());
  std::vector<CertReport> reports(seeds.size());
  RunOptions opt;
  opt.iterations = c.iterations;
  opt.eval_every = c.eval_every;
  opt.residual_tol = c.residual_tol;
  opt.thin = c.thin;
  opt.full_trace = c.full_trace;
  opt.init = c.init;
  parallel_for(seeds.size(), [&](std::size_t k) {
    runs[k] = sgd_run(*s.model, s.data, bank, s.box, s.cp, s.robust, c.schedule, s.certs, opt,
                      SeedBundle{c.seeds.bank, seeds[k]});
    reports[k] = certify_run(runs[k], crit_f.points, eps);
  });
  Artifacts files;
  std::string rcsv = "seed,iterations_run,residual_hit,final_residual,tail_distance,tail_count,success\n";
  std::size_t successes = 0;
  json jruns = json::array();
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const bool hit = !c.residual_tol || runs[k].residual_hit.has_value();
    const bool ok = hit && reports[k].pass;
    successes += ok ? 1 : 0;
    rcsv += std::to_string(seeds[k]) + ',' + std::to_string(runs[k].iterations_run) + ',' +
            (runs[k].residual_hit ? std::to_string(*runs[k].residual_hit) : std::string("")) + ',' +
            fmt17(runs[k].final_residual) + ',' + fmt17(reports[k].tail_distance) + ',' +
            std::to_string(reports[k].tail_count) + ',' + (ok ? "1" : "0") + '\n';
    files["sgd_trace_" + std::to_string(seeds[k]) + ".csv"] = trace_csv(runs[k]);
    jruns.push_back({{"seed", seeds[k]},
                     {"residual_hit", runs[k].residual_hit ? json(*runs[k].residual_hit) : json(nullptr)},
                     {"final_residual", fmt17(runs[k].final_residual)},
                     {"tail_distance", fmt17(reports[k].tail_distance)},
                     {"success", ok}});
  }
  const std::size_t need = c.certify.min_successes.value_or(seeds.size());
  const bool sgd_ok = successes >= need;

  files["crit_oracle.csv"] = ocsv;
  files["crit_smooth.csv"] = scsv;
  files["inclusion.csv"] = icsv;
  files["sgd.csv"] = rcsv;
  json verdicts = {{"eps", fmt17(eps)},
                   {"oracle_points", crit_f.points.size()},
                   {"oracle_min_residual", fmt17(crit_f.min_residual)},
                   {"cells", jcells},
                   {"extreme_cell", {{"beta", fmt17(extreme.beta)}, {"m", extreme.m}, {"included", extreme.included}}},
                   {"empirical_beta_bar", opt_number(beta_bar)},
                   {"empirical_m_bar", m_bar ? json(*m_bar) : json(nullptr)},
                   {"sgd_runs", jruns},
                   {"sgd_successes", successes},
                   {"sgd_required", need},
                   {"sgd_pass", sgd_ok}};
  const bool pass = extreme.included && sgd_ok;
  std::ostringstream msg;
  msg << "certify-critical: inclusion at (beta=" << fmt17(extreme.beta) << ", m=" << extreme.m << ") "
      << (extreme.included ? "holds" : "FAILS") << " (directed distance " << fmt17(extreme.hausdorff) << ", eps "
      << fmt17(eps) << "); sgd " << successes << "/" << seeds.size() << " certified";
  return finish("certify-critical", s, std::move(files), std::move(verdicts), pass, msg.str());
}

CommandResult run_command(const std::string& name, const RunConfig& config) {
  if (name == "train") return cmd_train(config);
  if (name == "check-gradients") return cmd_check_gradients(config);
  if (name == "sweep-beta") return cmd_sweep_beta(config);
  if (name == "certify-critical") return cmd_certify_critical(config);
  throw ValidationError("unknown command '" + name + "'");
}

CommandResult cmd_replay(const std::string& record_path) {
  namespace fs = std::filesystem;
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("replay: cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  fs::path path(record_path);
  if (fs::is_directory(path)) path /= "record.json";
  json rec;
  try {
    rec = json::parse(read(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("replay: record is not valid JSON: ") + e.what());
  }
  for (const char* key : {"command", "loss", "config", "outputs"}) {
    if (!rec.contains(key)) throw ValidationError(std::string("replay: record lacks '") + key + "'");
  }
  if (!rec["config"].contains("loss") || rec["loss"] != rec["config"]["loss"]) {
    throw ValidationError("replay: config mismatch, record loss '" + rec["loss"].dump() +
                          "' differs from the config snapshot's loss");
  }
  RunConfig cfg = config_from_json(rec["config"]);
  if (rec.contains("seeds")) {
    const auto& sd = rec["seeds"];
    if (sd.value("bank", cfg.seeds.bank) != cfg.seeds.bank || sd.value("index", cfg.seeds.index) != cfg.seeds.index) {
      throw MismatchError("replay: seed bundle differs from the config snapshot");
    }
  }
  const CommandResult fresh = run_command(rec["command"].get<std::string>(), cfg);
  const fs::path dir = path.parent_path();
  std::vector<std::string> names;
  for (const auto& n : rec["outputs"]) names.push_back(n.get<std::string>());
  names.push_back("record.json");
  for (const auto& name : names) {
    auto it = fresh.files.find(name);
    if (it == fresh.files.end()) throw MismatchError("replay: rerun did not produce '" + name + "'");
    if (read(dir / name) != it->second) throw MismatchError("replay: '" + name + "' differs from the rerun");
  }
  return {0, {}, "replay: " + std::to_string(names.size()) + " artifacts identical"};
}

std::string resolve_out_dir(const std::optional<std::string>& flag, const RunConfig& config) {
  if (flag) return *flag;
  if (config.out) return *config.out;
  if (const char* env = std::getenv("WDRO_OUT_DIR"); env && *env) return env;
  return "wdro_out";
}

void write_artifacts(const std::string& dir, const Artifacts& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
  for (const auto& [name, body] : files) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + name + "' in '" + dir + "'");
    out << body;
  }
}

}  // namespace wdro
