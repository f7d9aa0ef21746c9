#include "wdro/noise_bank.hpp"

#include <cmath>
#include <string>

#include "wdro/error.hpp"
#include "wdro/rng.hpp"

namespace wdro {

NoiseBank sample_noise_bank(std::size_t m, std::size_t d, int J, double sigma2, std::uint64_t seed) {
  if (m < 1) throw ValidationError("noise bank size m must be >= 1");
  if (d < 1) throw ValidationError("noise bank dimension d must be >= 1");
  if (J < 1) throw ValidationError("noise bank label count J must be >= 1");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ValidationError("sigma2 must be positive and finite");

  NoiseBank bank;
  bank.d_ = d;
  bank.J_ = J;
  bank.sigma2_ = sigma2;
  bank.seed_ = seed;
  bank.omegas_.resize(m * d);
  bank.zs_.resize(m);

  const double sigma = std::sqrt(sigma2);
  Stream gauss(seed);
  for (double& w : bank.omegas_) w = sigma * gauss.normal();
  Stream labels(splitmix64(seed));
  for (int& z : bank.zs_) z = 1 + static_cast<int>(labels.below(static_cast<std::uint64_t>(J)));
  bank.finish();
  return bank;
}

void NoiseBank::finish() {
  sqnorms_.resize(zs_.size());
  for (std::size_t l = 0; l < zs_.size(); ++l) {
    double s = 0.0;
    for (double w : omega(l)) s += w * w;
    sqnorms_[l] = s;
  }
}

NoiseBank NoiseBank::prefix(std::size_t m) const {
  if (m < 1 || m > size()) {
    throw ValidationError("prefix size " + std::to_string(m) + " outside 1.." + std::to_string(size()));
  }
  NoiseBank b;
  b.d_ = d_;
  b.J_ = J_;
  b.sigma2_ = sigma2_;
  b.seed_ = seed_;
  b.omegas_.assign(omegas_.begin(), omegas_.begin() + static_cast<std::ptrdiff_t>(m * d_));
  b.zs_.assign(zs_.begin(), zs_.begin() + static_cast<std::ptrdiff_t>(m));
  b.sqnorms_.assign(sqnorms_.begin(), sqnorms_.begin() + static_cast<std::ptrdiff_t>(m));
  return b;
}

bool NoiseBank::operator==(const NoiseBank& o) const {
  return d_ == o.d_ && J_ == o.J_ && sigma2_ == o.sigma2_ && seed_ == o.seed_ && omegas_ == o.omegas_ &&
         zs_ == o.zs_;
}

nlohmann::json NoiseBank::to_json() const {
  nlohmann::json omegas = nlohmann::json::array();
  for (std::size_t l = 0; l < size(); ++l) {
    auto w = omega(l);
    omegas.push_back(std::vector<double>(w.begin(), w.end()));
  }
  return {{"seed", seed_}, {"m", size()}, {"d", d_}, {"J", J_}, {"sigma2", sigma2_}, {"omegas", omegas}, {"zs", zs_}};
}

NoiseBank NoiseBank::from_json(const nlohmann::json& j) {
  NoiseBank b;
  try {
    b.seed_ = j.at("seed").get<std::uint64_t>();
    b.d_ = j.at("d").get<std::size_t>();
    b.J_ = j.at("J").get<int>();
    b.sigma2_ = j.at("sigma2").get<double>();
    const auto m = j.at("m").get<std::size_t>();
    b.zs_ = j.at("zs").get<std::vector<int>>();
    const auto& omegas = j.at("omegas");
    if (omegas.size() != m || b.zs_.size() != m) throw ValidationError("noise bank JSON: lengths differ from m");
    b.omegas_.reserve(m * b.d_);
    for (const auto& row : omegas) {
      auto v = row.get<std::vector<double>>();
      if (v.size() != b.d_) throw ValidationError("noise bank JSON: omega of wrong dimension");
      b.omegas_.insert(b.omegas_.end(), v.begin(), v.end());
    }
    for (int z : b.zs_) {
      if (z < 1 || z > b.J_) throw ValidationError("noise bank JSON: label outside 1..J");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("noise bank JSON: ") + e.what());
  }
  b.finish();
  return b;
}

}  // namespace wdro
