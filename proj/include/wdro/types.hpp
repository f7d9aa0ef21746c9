#ifndef WDRO_TYPES_HPP
#define WDRO_TYPES_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace wdro {

/// One data point xi = (x, y). Labels are 1-based. `target` is the side
/// column carried by regression datasets; classifiers ignore it and it is
/// never perturbed by the transport.
struct Sample {
  std::vector<double> x;
  int y = 1;
  double target = 0.0;

  std::size_t dim() const { return x.size(); }
};

/// Empirical distribution with uniform weights 1/n.
class Dataset {
 public:
  Dataset() = default;
  /// Validates n >= 1, a shared dimension d >= 1, finite features and
  /// labels in 1..num_labels.
  Dataset(std::vector<Sample> samples, int num_labels);

  std::size_t size() const { return samples_.size(); }
  std::size_t dim() const { return d_; }
  int num_labels() const { return J_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
  std::size_t d_ = 0;
  int J_ = 0;
};

struct CostParams {
  double kappa = 1.0;

  void validate() const;
};

/// The joint decision variable (theta, lambda).
struct ParamPoint {
  std::vector<double> theta;
  double lambda = 1.0;

  std::size_t size() const { return theta.size() + 1; }
  /// Flattened (theta_1..theta_p, lambda).
  std::vector<double> flat() const;
  static ParamPoint from_flat(std::span<const double> v);

  bool operator==(const ParamPoint&) const = default;
};

/// The compact set K = Theta x Lambda with Theta an axis-aligned box.
struct ParamBox {
  std::vector<double> theta_lo;
  std::vector<double> theta_hi;
  double lambda_min = 1.0;
  double lambda_max = 1.0;

  std::size_t param_dim() const { return theta_lo.size(); }
  void validate() const;
  bool contains(const ParamPoint& w) const;
  /// Largest Euclidean norm of a theta in the box.
  double max_theta_norm() const;
  double diameter() const;
  ParamPoint center() const;
};

struct RobustnessConfig {
  double rho = 0.1;
  double beta = 0.1;

  void validate() const;
};

}  // namespace wdro

#endif  // WDRO_TYPES_HPP
