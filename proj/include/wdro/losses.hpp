#ifndef WDRO_LOSSES_HPP
#define WDRO_LOSSES_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wdro/types.hpp"

namespace wdro {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// A differentiable loss f(theta, x, y). Implementations are immutable and
/// reentrant.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::string key() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t feature_dim() const = 0;

  /// Returns f(theta, x, y). Writes the theta- and x-gradients into the
  /// output spans when they are non-empty. `target` is the regression side
  /// column and is ignored by classifiers.
  virtual double evaluate(std::span<const double> theta, std::span<const double> x, int y, double target,
                          std::span<double> grad_theta, std::span<double> grad_x) const = 0;

  double value(std::span<const double> theta, std::span<const double> x, int y, double target) const {
    return evaluate(theta, x, y, target, {}, {});
  }
  double value(std::span<const double> theta, const Sample& s) const { return value(theta, s.x, s.y, s.target); }

  /// True when x -> f(theta, x, y) is globally Lipschitz for theta in a box.
  virtual bool lipschitz_in_x() const = 0;
  /// Sound upper bound on sup_{theta in box, x, y} |grad_x f|.
  virtual double lipschitz_x_bound(const ParamBox& box) const;
  /// Sound enclosure of {f(theta, x, y) : theta in box}.
  virtual Interval value_range(const ParamBox& box, std::span<const double> x, int y, double target) const = 0;

 protected:
  void check_dims(std::span<const double> theta, std::span<const double> x, std::span<double> grad_theta,
                  std::span<double> grad_x) const;
};

/// f = (<theta, x> - t)^2 with t the sample's target column.
class LinearRegressionLoss final : public LossModel {
 public:
  explicit LinearRegressionLoss(std::size_t d) : d_(d) {}
  std::string key() const override { return "linreg"; }
  std::size_t param_dim() const override { return d_; }
  std::size_t feature_dim() const override { return d_; }
  double evaluate(std::span<const double> theta, std::span<const double> x, int y, double target,
                  std::span<double> grad_theta, std::span<double> grad_x) const override;
  bool lipschitz_in_x() const override { return false; }
  Interval value_range(const ParamBox& box, std::span<const double> x, int y, double target) const override;

 private:
  std::size_t d_;
};

/// f = log(1 + exp(-s <theta, x>)), label 1 -> s = +1, label 2 -> s = -1.
class LogisticLoss final : public LossModel {
 public:
  explicit LogisticLoss(std::size_t d) : d_(d) {}
  std::string key() const override { return "logistic"; }
  std::size_t param_dim() const override { return d_; }
  std::size_t feature_dim() const override { return d_; }
  double evaluate(std::span<const double> theta, std::span<const double> x, int y, double target,
                  std::span<double> grad_theta, std::span<double> grad_x) const override;
  bool lipschitz_in_x() const override { return true; }
  double lipschitz_x_bound(const ParamBox& box) const override;
  Interval value_range(const ParamBox& box, std::span<const double> x, int y, double target) const override;

 private:
  std::size_t d_;
};

/// Binary cross-entropy on a feedforward network with softplus hidden
/// activations and a sigmoid output. widths = [d, h_1, ..., h_k, 1].
///
/// theta packs, layer by layer, the row-major weight matrix (out x in)
/// followed by the bias vector. Label 1 maps to the target y' = 1 and label
/// 2 to y' = 0, so that widths = [d, 1] with zero bias is the logistic loss.
/// The loss is evaluated from the output logit z as softplus(-s z), which
/// equals -y' log h - (1 - y') log(1 - h) without forming log(sigmoid).
class MlpBceLoss final : public LossModel {
 public:
  explicit MlpBceLoss(std::vector<std::size_t> widths);
  std::string key() const override { return "mlp"; }
  std::size_t param_dim() const override { return param_count_; }
  std::size_t feature_dim() const override { return widths_.front(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  double evaluate(std::span<const double> theta, std::span<const double> x, int y, double target,
                  std::span<double> grad_theta, std::span<double> grad_x) const override;
  bool lipschitz_in_x() const override { return true; }
  /// Product over layers of the Frobenius bound max_{W in box} |W|_F, which
  /// dominates the operator norm; softplus and the logit loss are 1-Lipschitz.
  double lipschitz_x_bound(const ParamBox& box) const override;
  /// Interval-arithmetic forward pass over the theta box.
  Interval value_range(const ParamBox& box, std::span<const double> x, int y, double target) const override;

 private:
  std::vector<std::size_t> widths_;
  std::size_t param_count_ = 0;
};

double softplus(double t);
double sigmoid(double t);

/// "linreg" | "logistic" | "mlp". `widths` is only read for "mlp" and must
/// start with d and end with 1.
std::unique_ptr<LossModel> make_loss(const std::string& key, std::size_t d, const std::vector<std::size_t>& widths = {});

}  // namespace wdro

#endif  // WDRO_LOSSES_HPP
