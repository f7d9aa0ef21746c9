#include <cmath>
#include <memory>

#include "doctest.h"
#include "wdro/error.hpp"
#include "wdro/losses.hpp"
#include "wdro/rng.hpp"

using namespace wdro;

namespace {

struct Probe {
  std::vector<double> theta, x;
  int y;
};

Probe random_probe(Stream& rng, std::size_t p, std::size_t d, double scale = 1.0) {
  Probe pr{std::vector<double>(p), std::vector<double>(d), 1 + static_cast<int>(rng.below(2))};
  for (auto& v : pr.theta) v = scale * rng.normal();
  for (auto& v : pr.x) v = scale * rng.normal();
  return pr;
}

// Central differences, step 1e-5 scaled by coordinate magnitude.
double fd_rel_err(const LossModel& f, const Probe& pr, double target) {
  std::vector<double> gt(pr.theta.size()), gx(pr.x.size());
  f.evaluate(pr.theta, pr.x, pr.y, target, gt, gx);
  double num = 0.0, den = 1.0;
  auto sweep = [&](std::vector<double> v, bool is_theta, const std::vector<double>& g) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(v[j]));
      const double keep = v[j];
      v[j] = keep + h;
      const double up = is_theta ? f.value(v, pr.x, pr.y, target) : f.value(pr.theta, v, pr.y, target);
      v[j] = keep - h;
      const double dn = is_theta ? f.value(v, pr.x, pr.y, target) : f.value(pr.theta, v, pr.y, target);
      v[j] = keep;
      const double fd = (up - dn) / (2 * h);
      num = std::max(num, std::abs(fd - g[j]));
      den = std::max(den, std::abs(fd));
    }
  };
  sweep(pr.theta, true, gt);
  sweep(pr.x, false, gx);
  return num / den;
}

}  // namespace

TEST_CASE("linear regression examples") {
  LinearRegressionLoss f1(1);
  std::vector<double> gt(1), gx(1);
  CHECK(f1.evaluate(std::vector<double>{1}, std::vector<double>{2}, 1, 2.0, gt, gx) == 0.0);
  CHECK(gt[0] == 0.0);
  CHECK(gx[0] == 0.0);

  LinearRegressionLoss f2(2);
  std::vector<double> g2(2);
  CHECK(f2.evaluate(std::vector<double>{1, 1}, std::vector<double>{1, 2}, 1, 0.0, g2, {}) == 9.0);
  CHECK(g2[0] == 6.0);
  CHECK(g2[1] == 12.0);
  CHECK_THROWS_AS(f2.value(std::vector<double>{1}, std::vector<double>{1, 2}, 1, 0.0), ValidationError);
  CHECK_FALSE(f2.lipschitz_in_x());
  CHECK_THROWS_AS(f2.lipschitz_x_bound(ParamBox{{-1, -1}, {1, 1}, 1, 2}), ContractError);
}

TEST_CASE("logistic examples") {
  LogisticLoss f(2);
  Stream rng(1);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x{rng.normal(), rng.normal()};
    CHECK(f.value(std::vector<double>{0, 0}, x, 1 + k % 2, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  const double v = f.value(std::vector<double>{50, 0}, std::vector<double>{1, 0}, 1, 0.0);
  CHECK(v > 0.0);
  CHECK(v == doctest::Approx(std::exp(-50.0)).epsilon(1e-12));
  CHECK(f.value(std::vector<double>{800, 0}, std::vector<double>{1, 0}, 2, 0.0) == doctest::Approx(800.0));
  CHECK_THROWS_AS(f.value(std::vector<double>{0, 0}, std::vector<double>{1, 0}, 3, 0.0), ValidationError);
}

TEST_CASE("mlp examples") {
  MlpBceLoss net({2, 3, 1});
  CHECK(net.param_dim() == 3 * 2 + 3 + 3 + 1);
  std::vector<double> zero(net.param_dim(), 0.0);
  CHECK(net.value(zero, std::vector<double>{0.3, -2.0}, 1, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(net.value(std::vector<double>(5), std::vector<double>{0.3, -2.0}, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(MlpBceLoss({2, 3}), ValidationError);
}

TEST_CASE("single-layer mlp is the logistic loss") {
  MlpBceLoss net({2, 1});
  LogisticLoss logi(2);
  Stream rng(2);
  for (int k = 0; k < 100; ++k) {
    const Probe pr = random_probe(rng, 2, 2, 2.0);
    std::vector<double> packed{pr.theta[0], pr.theta[1], 0.0};
    CHECK(std::abs(net.value(packed, pr.x, pr.y, 0.0) - logi.value(pr.theta, pr.x, pr.y, 0.0)) <= 1e-10);
  }
}

TEST_CASE("analytic gradients match central differences") {
  Stream rng(3);
  std::vector<std::unique_ptr<LossModel>> models;
  models.push_back(std::make_unique<LinearRegressionLoss>(3));
  models.push_back(std::make_unique<LogisticLoss>(2));
  models.push_back(std::make_unique<MlpBceLoss>(std::vector<std::size_t>{2, 4, 3, 1}));
  for (const auto& m : models) {
    CAPTURE(m->key());
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Probe pr = random_probe(rng, m->param_dim(), m->feature_dim());
      worst = std::max(worst, fd_rel_err(*m, pr, rng.normal()));
    }
    CHECK(worst <= (m->key() == "mlp" ? 1e-5 : 1e-6));
  }
}

TEST_CASE("value ranges and Lipschitz bounds are sound") {
  Stream rng(4);
  const ParamBox box{{-1.0, -0.5, -2.0, 0.0, -1.0, -1.0, 0.5, -1.0, -0.3}, {1.0, 0.5, 0.0, 1.0, 1.0, 1.0, 1.5, 1.0, 0.3}, 1,
                     2};
  MlpBceLoss net({2, 2, 1});
  REQUIRE(net.param_dim() == box.param_dim());
  LogisticLoss logi(2);
  const ParamBox lbox{{-1, -2}, {1, 0.5}, 1, 2};
  const double L = net.lipschitz_x_bound(box);
  const double Ll = logi.lipschitz_x_bound(lbox);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> th(9), x{3 * rng.normal(), 3 * rng.normal()}, gx(2);
    for (std::size_t j = 0; j < 9; ++j) th[j] = box.theta_lo[j] + (box.theta_hi[j] - box.theta_lo[j]) * rng.uniform();
    const int y = 1 + static_cast<int>(rng.below(2));
    const double v = net.evaluate(th, x, y, 0.0, {}, gx);
    const Interval r = net.value_range(box, x, y, 0.0);
    CHECK(v >= r.lo - 1e-12);
    CHECK(v <= r.hi + 1e-12);
    CHECK(std::hypot(gx[0], gx[1]) <= L + 1e-12);

    std::vector<double> lt{lbox.theta_lo[0] + 2 * rng.uniform(), lbox.theta_lo[1] + 2.5 * rng.uniform()};
    const double lv = logi.evaluate(lt, x, y, 0.0, {}, gx);
    const Interval lr = logi.value_range(lbox, x, y, 0.0);
    CHECK(lv >= lr.lo - 1e-12);
    CHECK(lv <= lr.hi + 1e-12);
    CHECK(std::hypot(gx[0], gx[1]) <= Ll + 1e-12);
  }
}

TEST_CASE("loss factory") {
  CHECK(make_loss("linreg", 2)->param_dim() == 2);
  CHECK(make_loss("logistic", 3)->param_dim() == 3);
  CHECK(make_loss("mlp", 2, {2, 5, 1})->param_dim() == 21);
  CHECK_THROWS_AS(make_loss("svm", 2), ValidationError);
  CHECK_THROWS_AS(make_loss("mlp", 2, {3, 1}), ValidationError);
}
