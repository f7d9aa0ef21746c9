#include "wdro/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <tuple>

#include "wdro/cost.hpp"
#include "wdro/error.hpp"
#include "wdro/parallel.hpp"

namespace wdro {
namespace {

constexpr double kMinRadius = 1e-3;

std::size_t default_grid(std::size_t d) { return d == 1 ? 2001 : 161; }

struct Candidate {
  double h;
  int label;
  std::size_t index;
};

// Exponent h_xi at (x', y').
double exponent(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                std::span<const double> x, int y, const CostParams& cp) {
  return model.value(theta, x, y, xi.target) - lambda * mixed_cost(xi.x, xi.y, x, y, cp);
}

}  // namespace

CompactWindow compact_window(const GrowthCert& cert, const LossModel& model, const ParamBox& box,
                             const CostParams& cp, int num_labels) {
  if (!(cert.lambda_growth > 0.0)) {
    throw ValidationError("compact_window: lambda_xi = 0 gives an unbounded window; certify with a positive lambda_xi");
  }
  cp.validate();
  const Sample& xi = cert.sample;
  // min_theta f(theta, xi) from below, so the radius only grows.
  const double fmin = model.value_range(box, xi.x, xi.y, xi.target).lo;
  const double gap = std::max(cert.mu - fmin, 0.0);
  const double r = std::sqrt(1.5 * 2.0 * gap / cert.lambda_growth);
  CompactWindow w;
  w.center = xi.x;
  w.radius = std::max(r, kMinRadius);
  w.num_labels = std::max(num_labels, xi.y);
  return w;
}

PhiOracle brute_force_phi(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                          const CompactWindow& window, const CostParams& cp, const BruteForceOptions& options) {
  const std::size_t d = xi.x.size();
  if (d == 0 || d > 2) throw ValidationError("brute_force_phi: only d <= 2 is supported, got d=" + std::to_string(d));
  if (window.center.size() != d) throw ValidationError("brute_force_phi: window dimension mismatch");
  if (!(window.radius > 0.0)) throw ValidationError("brute_force_phi: window radius must be positive");
  const std::size_t G = options.grid ? options.grid : default_grid(d);
  if (G < 3) throw ValidationError("brute_force_phi: grid needs at least 3 points per axis");
  const int J = window.num_labels;
  const double r = window.radius;
  const double hstep = 2.0 * r / static_cast<double>(G - 1);
  const std::size_t cells = d == 1 ? G : G * G;

  auto coord = [&](std::size_t idx, std::span<double> x) {
    if (d == 1) {
      x[0] = window.center[0] - r + hstep * static_cast<double>(idx);
    } else {
      x[0] = window.center[0] - r + hstep * static_cast<double>(idx / G);
      x[1] = window.center[1] - r + hstep * static_cast<double>(idx % G);
    }
  };

  std::vector<double> x(d);
  std::vector<double> values(cells);
  std::vector<Candidate> cands;
  double grid_best = -std::numeric_limits<double>::infinity();
  for (int y = 1; y <= J; ++y) {
    for (std::size_t idx = 0; idx < cells; ++idx) {
      coord(idx, x);
      values[idx] = exponent(model, theta, lambda, xi, x, y, cp);
      if (!std::isfinite(values[idx])) throw NumericError("brute_force_phi: non-finite exponent on the grid");
      grid_best = std::max(grid_best, values[idx]);
    }
    // Discrete local maxima (>= every existing neighbour).
    for (std::size_t idx = 0; idx < cells; ++idx) {
      const double v = values[idx];
      bool is_max = true;
      if (d == 1) {
        if (idx > 0 && values[idx - 1] > v) is_max = false;
        if (idx + 1 < G && values[idx + 1] > v) is_max = false;
      } else {
        const long i = static_cast<long>(idx / G), j = static_cast<long>(idx % G);
        const long g = static_cast<long>(G);
        for (long di = -1; di <= 1 && is_max; ++di) {
          for (long dj = -1; dj <= 1; ++dj) {
            if (!di && !dj) continue;
            const long a = i + di, b = j + dj;
            if (a < 0 || b < 0 || a >= g || b >= g) continue;
            if (values[static_cast<std::size_t>(a * g + b)] > v) {
              is_max = false;
              break;
            }
          }
        }
      }
      if (is_max) cands.push_back({v, y, idx});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.h, a.label, a.index) < std::tie(a.h, b.label, b.index);
  });
  if (cands.size() > options.top_k) cands.resize(std::max<std::size_t>(options.top_k, 1));

  std::vector<double> gx(d);
  std::vector<double> trial(d);
  std::vector<ArgmaxPoint> refined;
  for (const Candidate& c : cands) {
    ArgmaxPoint pt;
    pt.x.assign(d, 0.0);
    coord(c.index, pt.x);
    pt.label = c.label;
    pt.h = c.h;
    double step = options.step0;
    for (int it = 0; it < options.refine_steps; ++it) {
      model.evaluate(theta, pt.x, pt.label, xi.target, {}, gx);
      double gnorm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        gx[j] -= 2.0 * lambda * (pt.x[j] - xi.x[j]);
        gnorm += gx[j] * gx[j];
      }
      if (gnorm == 0.0) break;
      for (std::size_t j = 0; j < d; ++j) {
        trial[j] = std::clamp(pt.x[j] + step * gx[j], window.center[j] - r, window.center[j] + r);
      }
      const double ht = exponent(model, theta, lambda, xi, trial, pt.label, cp);
      if (ht > pt.h) {
        pt.x = trial;
        pt.h = ht;
        step *= 2.0;
      } else {
        step *= 0.5;
        // Stop once a trial move is below rounding of the coordinates.
        if (step * std::sqrt(gnorm) < 1e-14 * (1.0 + std::sqrt(squared_norm(pt.x)))) break;
      }
    }
    refined.push_back(std::move(pt));
  }

  PhiOracle out;
  out.grid_best = grid_best;
  double hstar = grid_best;
  for (const auto& p : refined) hstar = std::max(hstar, p.h);
  const double tol = options.tol_argmax ? *options.tol_argmax : 1e-6 * (1.0 + std::abs(hstar));
  out.phi = hstar;
  out.argmax.h_star = hstar;
  out.argmax.tol = tol;
  std::stable_sort(refined.begin(), refined.end(), [](const ArgmaxPoint& a, const ArgmaxPoint& b) { return a.h > b.h; });
  const double merge = 2.0 * hstep;
  for (auto& p : refined) {
    if (p.h < hstar - tol) continue;
    bool dup = false;
    for (const auto& q : out.argmax.points) {
      if (q.label == p.label && distance(q.x, p.x) <= merge) {
        dup = true;
        break;
      }
    }
    if (!dup) out.argmax.points.push_back(std::move(p));
  }
  return out;
}

SubdiffSet clarke_subdiff(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                          const ArgmaxSet& argmax, const CostParams& cp) {
  (void)lambda;
  SubdiffSet s;
  const std::size_t p = model.param_dim();
  for (const auto& z : argmax.points) {
    std::vector<double> v(p + 1);
    model.evaluate(theta, z.x, z.label, xi.target, std::span<double>(v.data(), p), {});
    v[p] = -mixed_cost(xi.x, xi.y, z.x, z.label, cp);
    s.vertices.push_back(std::move(v));
  }
  dedupe_vertices(s);
  return s;
}

ObjectiveOracle::ObjectiveOracle(const LossModel& model, const Dataset& data, std::vector<CompactWindow> windows,
                                 CostParams cp, double rho, BruteForceOptions options)
    : model_(model), data_(data), windows_(std::move(windows)), cp_(cp), rho_(rho), options_(options) {
  if (data.dim() > 2) throw ValidationError("oracle: feature dimension " + std::to_string(data.dim()) + " > 2");
  if (model.param_dim() + 1 > 3) {
    throw ValidationError("oracle: parameter dimension p+1 = " + std::to_string(model.param_dim() + 1) + " > 3");
  }
  if (data.size() > 32) throw ValidationError("oracle: n = " + std::to_string(data.size()) + " > 32");
  if (windows_.size() != data.size()) throw ValidationError("oracle: need one window per sample");
}

ObjectiveOracle::Evaluation ObjectiveOracle::evaluate(const ParamPoint& w) const {
  Evaluation ev;
  const std::size_t n = data_.size();
  ev.per_sample.reserve(n);
  std::vector<SubdiffSet> hulls;
  hulls.reserve(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ev.per_sample.push_back(brute_force_phi(model_, w.theta, w.lambda, data_[i], windows_[i], cp_, options_));
    sum += ev.per_sample.back().phi;
    hulls.push_back(clarke_subdiff(model_, w.theta, w.lambda, data_[i], ev.per_sample.back().argmax, cp_));
  }
  ev.value = w.lambda * rho_ + sum / static_cast<double>(n);
  std::vector<double> offset(model_.param_dim() + 1, 0.0);
  offset.back() = rho_;
  ev.subdiff = minkowski_average(hulls, offset);
  return ev;
}

double ObjectiveOracle::criticality(const ParamPoint& w, const ParamBox& box) const {
  return dist_to_hull_plus_cone(subdiff(w), active_faces(w, box));
}

ProbeGrid probe_lattice(const ParamPoint& w, double eps, const ParamBox& box, double spacing) {
  if (!(eps > 0.0)) throw ValidationError("probe_lattice: eps must be positive");
  if (!(spacing > 0.0)) throw ValidationError("probe_lattice: spacing must be positive");
  const std::size_t q = w.size();
  std::vector<double> lo = box.theta_lo, hi = box.theta_hi;
  lo.push_back(box.lambda_min);
  hi.push_back(box.lambda_max);
  const auto c = w.flat();
  std::vector<long> first(q), last(q);
  std::size_t total = 1;
  for (std::size_t j = 0; j < q; ++j) {
    const double a = std::max(lo[j], c[j] - eps), b = std::min(hi[j], c[j] + eps);
    first[j] = static_cast<long>(std::ceil((a - lo[j]) / spacing - 1e-9));
    last[j] = static_cast<long>(std::floor((b - lo[j]) / spacing + 1e-9));
    if (last[j] < first[j]) {
      total = 0;
      break;
    }
    total *= static_cast<std::size_t>(last[j] - first[j] + 1);
  }
  ProbeGrid g;
  g.spacing = spacing;
  g.points.push_back(w);
  std::vector<long> idx(first);
  std::vector<double> pt(q);
  for (std::size_t k = 0; k < total; ++k) {
    for (std::size_t j = 0; j < q; ++j) pt[j] = std::min(lo[j] + spacing * static_cast<double>(idx[j]), hi[j]);
    if (distance(pt, c) <= eps * (1.0 + 1e-12)) {
      auto p = ParamPoint::from_flat(pt);
      if (!(p == w)) g.points.push_back(std::move(p));
    }
    for (std::size_t j = q; j-- > 0;) {
      if (++idx[j] <= last[j]) break;
      idx[j] = first[j];
    }
  }
  return g;
}

bool enlargement_member(std::span<const double> grad, const ParamPoint& w, double eps, const SubdiffField& field,
                        const ProbeGrid& probes) {
  if (!(eps > 0.0)) throw ValidationError("enlargement_member: eps must be positive");
  if (!(probes.spacing > 0.0) || probes.spacing > eps / 4.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "enlargement_member: probe spacing " << probes.spacing << " too coarse; need <= eps/4 = " << eps / 4.0;
    throw ValidationError(os.str());
  }
  if (grad.size() != w.size()) throw ValidationError("enlargement_member: gradient dimension mismatch");
  for (const auto& p : probes.points) {
    if (distance(p, w) > eps * (1.0 + 1e-12)) continue;
    if (dist_to_hull(grad, field(p)) <= eps) return true;
  }
  return false;
}

LatticeField::LatticeField(const ParamBox& box, double spacing, SubdiffField field)
    : box_(box), spacing_(spacing), field_(std::move(field)) {
  box.validate();
  if (!(spacing > 0.0)) throw ValidationError("LatticeField: spacing must be positive");
  for (std::size_t j = 0; j <= box.param_dim(); ++j) {
    const double lo = j < box.param_dim() ? box.theta_lo[j] : box.lambda_min;
    const double hi = j < box.param_dim() ? box.theta_hi[j] : box.lambda_max;
    counts_.push_back(static_cast<std::size_t>(std::floor((hi - lo) / spacing + 1e-9)) + 1);
  }
}

std::size_t LatticeField::cached() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

std::optional<std::size_t> LatticeField::index_of(const ParamPoint& w) const {
  const auto c = w.flat();
  std::vector<double> lo = box_.theta_lo;
  lo.push_back(box_.lambda_min);
  std::size_t k = 0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double t = (c[j] - lo[j]) / spacing_;
    const double r = std::round(t);
    if (std::abs(t - r) > 1e-7 || r < 0 || r >= static_cast<double>(counts_[j])) return std::nullopt;
    k = k * counts_[j] + static_cast<std::size_t>(r);
  }
  return k;
}

SubdiffSet LatticeField::operator()(const ParamPoint& w) const {
  const auto k = index_of(w);
  if (!k) return field_(w);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(*k); it != cache_.end()) return it->second;
  }
  SubdiffSet v = field_(w);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(*k, std::move(v)).first->second;
}

namespace {

std::vector<double> axis(double lo, double hi, std::size_t n) {
  std::vector<double> a(n);
  if (n == 1) {
    a[0] = 0.5 * (lo + hi);
    return a;
  }
  for (std::size_t k = 0; k < n; ++k) a[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  a.back() = hi;
  return a;
}

}  // namespace

CritSet crit_set_grid(const ResidualField& residual, const ParamBox& box, std::span<const std::size_t> resolution,
                      double tol) {
  box.validate();
  if (!(tol > 0.0)) {
    throw ValidationError("crit_set_grid: tol must be positive; exact criticality is not observable on a grid");
  }
  const std::size_t q = box.param_dim() + 1;
  if (resolution.size() != q) throw ValidationError("crit_set_grid: need one resolution per coordinate");
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  for (std::size_t j = 0; j < q; ++j) {
    if (resolution[j] < 1) throw ValidationError("crit_set_grid: resolution must be >= 1");
    const double lo = j + 1 < q ? box.theta_lo[j] : box.lambda_min;
    const double hi = j + 1 < q ? box.theta_hi[j] : box.lambda_max;
    axes.push_back(axis(lo, hi, lo == hi ? 1 : resolution[j]));
    total *= axes.back().size();
  }
  std::vector<double> res(total);
  auto point = [&](std::size_t k) {
    std::vector<double> pt(q);
    for (std::size_t j = q; j-- > 0;) {
      pt[j] = axes[j][k % axes[j].size()];
      k /= axes[j].size();
    }
    return ParamPoint::from_flat(pt);
  };
  parallel_for(total, [&](std::size_t k) { res[k] = residual(point(k)); });

  CritSet out;
  out.searched = box;
  out.min_residual = std::numeric_limits<double>::infinity();
  std::size_t argmin = 0;
  for (std::size_t k = 0; k < total; ++k) {
    if (res[k] < out.min_residual) {
      out.min_residual = res[k];
      argmin = k;
    }
    if (res[k] <= tol) {
      out.points.push_back(point(k));
      out.residuals.push_back(res[k]);
    }
  }
  if (out.points.empty()) {
    std::ostringstream os;
    os.precision(6);
    auto best = point(argmin).flat();
    os << "crit_set_grid: resolution too coarse for tol=" << tol << " (smallest residual " << out.min_residual
       << " at (";
    for (std::size_t j = 0; j < best.size(); ++j) os << (j ? ", " : "") << best[j];
    os << "))";
    throw ValidationError(os.str());
  }
  return out;
}

CritSet crit_set_zoom(const ResidualField& residual, const ParamBox& box, std::span<const std::size_t> resolution,
                      double tol, int levels) {
  CritSet cur = crit_set_grid(residual, box, resolution, tol);
  ParamBox b = box;
  for (int level = 0; level < levels; ++level) {
    const std::size_t q = b.param_dim() + 1;
    std::vector<double> lo(q, std::numeric_limits<double>::infinity());
    std::vector<double> hi(q, -std::numeric_limits<double>::infinity());
    for (const auto& p : cur.points) {
      auto f = p.flat();
      for (std::size_t j = 0; j < q; ++j) {
        lo[j] = std::min(lo[j], f[j]);
        hi[j] = std::max(hi[j], f[j]);
      }
    }
    ParamBox nb = b;
    double ratio = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const double blo = j + 1 < q ? b.theta_lo[j] : b.lambda_min;
      const double bhi = j + 1 < q ? b.theta_hi[j] : b.lambda_max;
      const double cell = resolution[j] > 1 ? (bhi - blo) / static_cast<double>(resolution[j] - 1) : 0.0;
      const double nlo = std::max(blo, lo[j] - cell), nhi = std::min(bhi, hi[j] + cell);
      if (j + 1 < q) {
        nb.theta_lo[j] = nlo;
        nb.theta_hi[j] = nhi;
      } else {
        nb.lambda_min = nlo;
        nb.lambda_max = nhi;
      }
      if (cell > 0.0) ratio = std::max(ratio, (nhi - nlo) / (bhi - blo));
    }
    if (ratio <= 0.0 || ratio >= 1.0) break;
    try {
      cur = crit_set_grid(residual, nb, resolution, tol * ratio);
    } catch (const ValidationError&) {
      break;  // the finer grid missed every point; keep the coarser answer
    }
    tol *= ratio;
    b = nb;
  }
  return cur;
}

double directed_hausdorff(std::span<const ParamPoint> a, std::span<const ParamPoint> b) {
  if (a.empty()) return 0.0;
  if (b.empty()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : b) best = std::min(best, distance(p, r));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace wdro
