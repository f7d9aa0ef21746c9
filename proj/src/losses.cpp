#include "wdro/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wdro/error.hpp"

namespace wdro {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

double label_sign(int y) {
  if (y == 1) return 1.0;
  if (y == 2) return -1.0;
  throw ValidationError("binary losses expect labels in {1, 2}, got " + std::to_string(y));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// Range of <theta, x> over the theta box.
Interval linear_range(const ParamBox& box, std::span<const double> x) {
  Interval r;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double a = box.theta_lo[j] * x[j];
    const double b = box.theta_hi[j] * x[j];
    r.lo += std::min(a, b);
    r.hi += std::max(a, b);
  }
  return r;
}

double max_abs_sq(const ParamBox& box, std::size_t j) {
  const double a = std::max(std::abs(box.theta_lo[j]), std::abs(box.theta_hi[j]));
  return a * a;
}

}  // namespace

void LossModel::check_dims(std::span<const double> theta, std::span<const double> x, std::span<double> grad_theta,
                           std::span<double> grad_x) const {
  if (theta.size() != param_dim()) {
    throw ValidationError(key() + ": theta has length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(param_dim()));
  }
  if (x.size() != feature_dim()) {
    throw ValidationError(key() + ": x has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(feature_dim()));
  }
  if (!grad_theta.empty() && grad_theta.size() != param_dim()) {
    throw ValidationError(key() + ": theta-gradient buffer has wrong length");
  }
  if (!grad_x.empty() && grad_x.size() != feature_dim()) {
    throw ValidationError(key() + ": x-gradient buffer has wrong length");
  }
}

double LossModel::lipschitz_x_bound(const ParamBox&) const {
  throw ContractError(key() + " is not globally Lipschitz in x");
}

// --- linear regression -------------------------------------------------------

double LinearRegressionLoss::evaluate(std::span<const double> theta, std::span<const double> x, int, double target,
                                      std::span<double> grad_theta, std::span<double> grad_x) const {
  check_dims(theta, x, grad_theta, grad_x);
  const double r = dot(theta, x) - target;
  for (std::size_t j = 0; j < grad_theta.size(); ++j) grad_theta[j] = 2.0 * r * x[j];
  for (std::size_t j = 0; j < grad_x.size(); ++j) grad_x[j] = 2.0 * r * theta[j];
  return r * r;
}

Interval LinearRegressionLoss::value_range(const ParamBox& box, std::span<const double> x, int, double target) const {
  const Interval a = linear_range(box, x);
  const double lo = a.lo - target;
  const double hi = a.hi - target;
  const double top = std::max(lo * lo, hi * hi);
  const double bottom = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(lo * lo, hi * hi);
  return {bottom, top};
}

// --- logistic regression -----------------------------------------------------

double LogisticLoss::evaluate(std::span<const double> theta, std::span<const double> x, int y, double,
                              std::span<double> grad_theta, std::span<double> grad_x) const {
  check_dims(theta, x, grad_theta, grad_x);
  const double s = label_sign(y);
  const double a = dot(theta, x);
  if (!grad_theta.empty() || !grad_x.empty()) {
    const double da = -s * sigmoid(-s * a);
    for (std::size_t j = 0; j < grad_theta.size(); ++j) grad_theta[j] = da * x[j];
    for (std::size_t j = 0; j < grad_x.size(); ++j) grad_x[j] = da * theta[j];
  }
  return softplus(-s * a);
}

double LogisticLoss::lipschitz_x_bound(const ParamBox& box) const { return box.max_theta_norm(); }

Interval LogisticLoss::value_range(const ParamBox& box, std::span<const double> x, int y, double) const {
  const double s = label_sign(y);
  const Interval a = linear_range(box, x);
  // softplus(-s a) is monotone in a.
  const double u = softplus(-s * a.lo);
  const double v = softplus(-s * a.hi);
  return {std::min(u, v), std::max(u, v)};
}

// --- MLP with binary cross-entropy ------------------------------------------

MlpBceLoss::MlpBceLoss(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ValidationError("mlp architecture needs at least [d, 1]");
  if (widths_.back() != 1) throw ValidationError("mlp architecture must end with a single output unit");
  for (std::size_t w : widths_) {
    if (w == 0) throw ValidationError("mlp layer widths must be positive");
  }
  for (std::size_t l = 1; l < widths_.size(); ++l) param_count_ += widths_[l] * widths_[l - 1] + widths_[l];
}

double MlpBceLoss::evaluate(std::span<const double> theta, std::span<const double> x, int y, double,
                            std::span<double> grad_theta, std::span<double> grad_x) const {
  check_dims(theta, x, grad_theta, grad_x);
  const double s = label_sign(y);
  const std::size_t L = widths_.size() - 1;

  // acts holds a_0 = x, a_1, ..., a_{L-1}; pre holds z_1..z_L, concatenated.
  thread_local std::vector<double> acts;
  thread_local std::vector<double> pre;
  thread_local std::vector<double> delta;
  thread_local std::vector<double> delta_prev;
  std::size_t total = 0;
  for (std::size_t w : widths_) total += w;
  acts.resize(total);
  pre.resize(total);
  std::copy(x.begin(), x.end(), acts.begin());

  std::size_t offset = 0;      // into theta
  std::size_t in_offset = 0;   // into acts
  std::size_t out_offset = widths_[0];
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t nin = widths_[l - 1];
    const std::size_t nout = widths_[l];
    const double* W = theta.data() + offset;
    const double* b = W + nout * nin;
    for (std::size_t r = 0; r < nout; ++r) {
      double z = b[r];
      for (std::size_t c = 0; c < nin; ++c) z += W[r * nin + c] * acts[in_offset + c];
      pre[out_offset + r] = z;
      if (l < L) acts[out_offset + r] = softplus(z);
    }
    offset += nout * nin + nout;
    in_offset = out_offset;
    out_offset += nout;
  }
  const double logit = pre[total - 1];
  const double value = softplus(-s * logit);
  if (grad_theta.empty() && grad_x.empty()) return value;

  // Reverse pass.
  delta.assign(1, -s * sigmoid(-s * logit));
  std::size_t layer_end = total;  // end of layer l in pre/acts
  offset = param_count_;
  for (std::size_t l = L; l >= 1; --l) {
    const std::size_t nin = widths_[l - 1];
    const std::size_t nout = widths_[l];
    const std::size_t out_begin = layer_end - nout;
    const std::size_t in_begin = out_begin - nin;
    offset -= nout * nin + nout;
    const double* W = theta.data() + offset;
    if (!grad_theta.empty()) {
      double* gW = grad_theta.data() + offset;
      double* gb = gW + nout * nin;
      for (std::size_t r = 0; r < nout; ++r) {
        for (std::size_t c = 0; c < nin; ++c) gW[r * nin + c] = delta[r] * acts[in_begin + c];
        gb[r] = delta[r];
      }
    }
    delta_prev.assign(nin, 0.0);
    for (std::size_t r = 0; r < nout; ++r) {
      for (std::size_t c = 0; c < nin; ++c) delta_prev[c] += W[r * nin + c] * delta[r];
    }
    if (l > 1) {
      for (std::size_t c = 0; c < nin; ++c) delta_prev[c] *= sigmoid(pre[in_begin + c]);
    } else {
      for (std::size_t c = 0; c < grad_x.size(); ++c) grad_x[c] = delta_prev[c];
    }
    delta.swap(delta_prev);
    layer_end = out_begin;
  }
  return value;
}

double MlpBceLoss::lipschitz_x_bound(const ParamBox& box) const {
  if (box.param_dim() != param_count_) throw ValidationError("mlp: theta box has wrong dimension");
  double bound = 1.0;
  std::size_t offset = 0;
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    const std::size_t nw = widths_[l] * widths_[l - 1];
    double fro = 0.0;
    for (std::size_t j = offset; j < offset + nw; ++j) fro += max_abs_sq(box, j);
    bound *= std::sqrt(fro);
    offset += nw + widths_[l];
  }
  return bound;
}

Interval MlpBceLoss::value_range(const ParamBox& box, std::span<const double> x, int y, double) const {
  if (box.param_dim() != param_count_) throw ValidationError("mlp: theta box has wrong dimension");
  const double s = label_sign(y);
  std::vector<Interval> a(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) a[c] = {x[c], x[c]};
  std::size_t offset = 0;
  Interval logit;
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    const std::size_t nin = widths_[l - 1];
    const std::size_t nout = widths_[l];
    std::vector<Interval> next(nout);
    for (std::size_t r = 0; r < nout; ++r) {
      const std::size_t bj = offset + nout * nin + r;
      Interval z{box.theta_lo[bj], box.theta_hi[bj]};
      for (std::size_t c = 0; c < nin; ++c) {
        const std::size_t wj = offset + r * nin + c;
        const double p[4] = {box.theta_lo[wj] * a[c].lo, box.theta_lo[wj] * a[c].hi, box.theta_hi[wj] * a[c].lo,
                             box.theta_hi[wj] * a[c].hi};
        z.lo += *std::min_element(p, p + 4);
        z.hi += *std::max_element(p, p + 4);
      }
      next[r] = z;
    }
    offset += nout * nin + nout;
    if (l + 1 < widths_.size()) {
      for (auto& z : next) z = {softplus(z.lo), softplus(z.hi)};
      a = std::move(next);
    } else {
      logit = next.front();
    }
  }
  const double u = softplus(-s * logit.lo);
  const double v = softplus(-s * logit.hi);
  return {std::min(u, v), std::max(u, v)};
}

std::unique_ptr<LossModel> make_loss(const std::string& key, std::size_t d, const std::vector<std::size_t>& widths) {
  if (d < 1) throw ValidationError("loss feature dimension must be >= 1");
  if (key == "linreg") return std::make_unique<LinearRegressionLoss>(d);
  if (key == "logistic") return std::make_unique<LogisticLoss>(d);
  if (key == "mlp") {
    if (widths.empty()) throw ValidationError("mlp loss requires an architecture, e.g. [d, 8, 1]");
    if (widths.front() != d) {
      throw ValidationError("mlp architecture input width " + std::to_string(widths.front()) +
                            " differs from dataset dimension " + std::to_string(d));
    }
    return std::make_unique<MlpBceLoss>(widths);
  }
  throw ValidationError("unknown loss key '" + key + "' (expected linreg | logistic | mlp)");
}

}  // namespace wdro
