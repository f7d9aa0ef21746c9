#ifndef WDRO_NOISE_BANK_HPP
#define WDRO_NOISE_BANK_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace wdro {

/// The m fixed perturbation pairs (omega_l, z_l) shared by every iteration
/// and every data point of a run.
///
/// omega_l ~ N(0, sigma2 I_d) are drawn from one Stream seeded with `seed`,
/// coordinates in index order; z_l ~ Unif{1..J} from a second stream seeded
/// with splitmix64(seed). Both streams are sequential in l, so the bank of
/// size m is a prefix of the bank of size 2m for the same seed.
class NoiseBank {
 public:
  NoiseBank() = default;

  std::size_t size() const { return zs_.size(); }
  std::size_t dim() const { return d_; }
  int num_labels() const { return J_; }
  double sigma2() const { return sigma2_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> omega(std::size_t l) const { return {omegas_.data() + l * d_, d_}; }
  int z(std::size_t l) const { return zs_[l]; }
  /// |omega_l|^2, stored so transport terms are never recomputed from
  /// perturbed points.
  double omega_sqnorm(std::size_t l) const { return sqnorms_[l]; }

  /// First m entries; equals sample_noise_bank(m, ...) with the same seed.
  NoiseBank prefix(std::size_t m) const;

  bool operator==(const NoiseBank& o) const;

  nlohmann::json to_json() const;
  static NoiseBank from_json(const nlohmann::json& j);

  friend NoiseBank sample_noise_bank(std::size_t m, std::size_t d, int J, double sigma2, std::uint64_t seed);

 private:
  void finish();

  std::size_t d_ = 0;
  int J_ = 1;
  double sigma2_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<double> omegas_;  // row-major m x d
  std::vector<int> zs_;         // 1-based labels
  std::vector<double> sqnorms_;
};

NoiseBank sample_noise_bank(std::size_t m, std::size_t d, int J, double sigma2, std::uint64_t seed);

}  // namespace wdro

#endif  // WDRO_NOISE_BANK_HPP
