#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wdro/cost.hpp"
#include "wdro/dataset.hpp"
#include "wdro/error.hpp"
#include "wdro/growth.hpp"
#include "wdro/losses.hpp"
#include "wdro/noise_bank.hpp"
#include "wdro/rng.hpp"
#include "wdro/types.hpp"

using namespace wdro;

namespace {

ParamBox box1(double lo, double hi, double lmin = 1.0, double lmax = 2.0) { return ParamBox{{lo}, {hi}, lmin, lmax}; }

}  // namespace

TEST_CASE("mixed cost") {
  CostParams cp{0.5};
  CHECK(mixed_cost(Sample{{1, 0}, 1}, Sample{{0, 0}, 2}, cp) == doctest::Approx(1.5));
  CHECK(mixed_cost(Sample{{1, 2}, 1}, Sample{{1, 2}, 1}, cp) == 0.0);
  CHECK(mixed_cost(Sample{{3}, 1}, Sample{{3}, 2}, CostParams{2.0}) == 2.0);

  try {
    mixed_cost(Sample{{1, 2}, 1}, Sample{{1}, 1}, cp);
    FAIL("expected a dimension error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('2') != std::string::npos);
    CHECK(msg.find('1') != std::string::npos);
  }
}

TEST_CASE("mixed cost is symmetric and vanishes on the diagonal") {
  Stream rng(11);
  CostParams cp{0.7};
  for (int k = 0; k < 200; ++k) {
    Sample a{{rng.normal(), rng.normal()}, 1 + static_cast<int>(rng.below(3))};
    Sample b{{rng.normal(), rng.normal()}, 1 + static_cast<int>(rng.below(3))};
    CHECK(mixed_cost(a, b, cp) == mixed_cost(b, a, cp));
    CHECK(mixed_cost(a, a, cp) == 0.0);
    CHECK(mixed_cost(a, b, cp) >= 0.0);
  }
}

TEST_CASE("box projection") {
  const ParamBox box = box1(-1, 1, 0.5, 2);
  const ParamPoint inside{{0.3}, 1.0};
  CHECK(project_box(inside, box) == inside);
  const ParamPoint p = project_box(ParamPoint{{5.0}, 0.2}, box);
  CHECK(p.theta[0] == 1.0);
  CHECK(p.lambda == 0.5);
  CHECK(project_box(p, box) == p);

  Stream rng(3);
  for (int k = 0; k < 100; ++k) {
    ParamPoint a{{4 * rng.normal()}, 3 * rng.normal()};
    ParamPoint b{{4 * rng.normal()}, 3 * rng.normal()};
    CHECK(box.contains(project_box(a, box)));
    CHECK(distance(project_box(a, box), project_box(b, box)) <= distance(a, b) + 1e-15);
  }
}

TEST_CASE("active faces") {
  const ParamBox box{{-1, 0}, {1, 0}, 0.5, 2};
  const auto f = active_faces(ParamPoint{{-1, 0}, 2}, box);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == -1);
  CHECK(f[1] == 2);
  CHECK(f[2] == 1);
  CHECK(active_faces(ParamPoint{{0.2, 0}, 1}, box)[0] == 0);
}

TEST_CASE("box and config validation") {
  CHECK_THROWS_AS(box1(1, -1).validate(), ValidationError);
  CHECK_THROWS_AS(box1(-1, 1, 0.0, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(box1(-1, 1, 2.0, 1.0).validate(), ValidationError);
  CHECK_NOTHROW(box1(-1, 1).validate());
  CHECK_THROWS_AS((RobustnessConfig{0.0, 1.0}.validate()), ValidationError);
  CHECK_THROWS_AS((RobustnessConfig{0.1, 0.0}.validate()), ValidationError);
  CHECK_THROWS_AS(CostParams{0.0}.validate(), ValidationError);
  CHECK(box1(-1, 2).max_theta_norm() == 2.0);
}

TEST_CASE("dataset construction") {
  CHECK_THROWS_AS(Dataset({}, 1), ValidationError);
  CHECK_THROWS_AS(Dataset({Sample{{1.0}, 3}}, 2), ValidationError);
  CHECK_THROWS_AS(Dataset({Sample{{1.0}, 1}, Sample{{1.0, 2.0}, 1}}, 1), ValidationError);
  CHECK_THROWS_AS(Dataset({Sample{{NAN}, 1}}, 1), ValidationError);
}

TEST_CASE("CSV ingestion") {
  const Dataset d = parse_dataset("x1,y\n0.5,1\n-0.5,2\n", ColumnSchema{});
  CHECK(d.size() == 2);
  CHECK(d.dim() == 1);
  CHECK(d.num_labels() == 2);
  CHECK(d[1].x[0] == -0.5);

  CHECK_THROWS_AS(parse_dataset("", ColumnSchema{}), ValidationError);
  try {
    parse_dataset("x1,y\n0.5,1\n0.2,0\n", ColumnSchema{});
    FAIL("label 0 accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_dataset("x1,y\nabc,1\n", ColumnSchema{}), ValidationError);

  ColumnSchema reg;
  reg.label.reset();
  reg.target = "t";
  const Dataset r = parse_dataset("a,b,t\n1,2,3\n4,5,6\n", reg);
  CHECK(r.dim() == 2);
  CHECK(r.num_labels() == 1);
  CHECK(r[1].target == 6.0);

  const auto path = std::filesystem::temp_directory_path() / "wdro_core_model.csv";
  {
    std::ofstream out(path);
    out << "x1,x2,y\n0,0,1\n3,4,2\n";
  }
  const Dataset f = load_dataset(path.string(), ColumnSchema{});
  CHECK(f.size() == 2);
  CHECK(*median_pairwise_distance(f) == doctest::Approx(5.0));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset("/nonexistent/wdro.csv", ColumnSchema{}), ValidationError);
}

TEST_CASE("noise bank") {
  const NoiseBank a = sample_noise_bank(64, 2, 3, 0.5, 42);
  const NoiseBank b = sample_noise_bank(64, 2, 3, 0.5, 42);
  CHECK(a == b);
  CHECK_FALSE(a == sample_noise_bank(64, 2, 3, 0.5, 43));
  // Nested banks share their prefix.
  CHECK(sample_noise_bank(128, 2, 3, 0.5, 42).prefix(64) == a);
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(a.z(l) >= 1);
    CHECK(a.z(l) <= 3);
    CHECK(a.omega_sqnorm(l) == doctest::Approx(squared_norm(a.omega(l))));
  }
  CHECK(NoiseBank::from_json(a.to_json()) == a);
  CHECK_THROWS_AS(sample_noise_bank(0, 2, 3, 0.5, 1), ValidationError);
  CHECK_THROWS_AS(sample_noise_bank(8, 2, 3, 0.0, 1), ValidationError);
}

TEST_CASE("noise bank moments") {
  const double s2 = 2.0;
  const NoiseBank bank = sample_noise_bank(200000, 1, 2, s2, 7);
  double m1 = 0, m2 = 0, ones = 0;
  for (std::size_t l = 0; l < bank.size(); ++l) {
    m1 += bank.omega(l)[0];
    m2 += bank.omega_sqnorm(l);
    ones += bank.z(l) == 1;
  }
  const double n = static_cast<double>(bank.size());
  CHECK(std::abs(m1 / n) < 5 * std::sqrt(s2 / n));
  CHECK(m2 / n == doctest::Approx(s2).epsilon(0.02));
  CHECK(ones / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("growth certificates") {
  CostParams cp{1.0};
  LinearRegressionLoss lin(1);
  CertOptions opt;
  const GrowthCert c = growth_certificate(lin, Sample{{1.0}, 1, 0.0}, box1(-1, 1), cp, opt);
  CHECK(c.lambda_growth == doctest::Approx(4.0));
  CHECK(c.mu == doctest::Approx(2.0));

  LogisticLoss logi(2);
  CertOptions lo;
  lo.requested_lambda = 0.1;
  lo.num_labels = 2;
  const GrowthCert g = growth_certificate(logi, Sample{{0.5, -1.0}, 1}, ParamBox{{-1, -1}, {1, 1}, 1, 2}, cp, lo);
  CHECK(std::isfinite(g.mu));
  CHECK(g.lambda_growth == 0.1);
  CHECK_THROWS_AS(growth_certificate(logi, Sample{{0.5, -1.0}, 1}, ParamBox{{-1, -1}, {1, 1}, 1, 2}, cp, {}),
                  ValidationError);

  GrowthCert bad = c;
  bad.mu = 0.5;
  bad.lambda_growth = 0.1;
  CHECK_THROWS_AS(validate_certificate(lin, bad, box1(-1, 1), cp, opt), ContractError);
}

TEST_CASE("lambda_min over a dataset") {
  std::vector<GrowthCert> certs(3);
  certs[0].lambda_growth = 0.1;
  certs[1].lambda_growth = 4;
  certs[2].lambda_growth = 2;
  CHECK(lambda_min_for_dataset(certs) == 4);
  CHECK(lambda_min_for_dataset(std::span(certs).first(1)) == 0.1);
  CHECK_THROWS_AS(lambda_min_for_dataset({}), ValidationError);

  LogisticLoss logi(2);
  CertOptions lo;
  lo.requested_lambda = 0.1;
  lo.num_labels = 2;
  lo.probes = 500;
  std::vector<GrowthCert> lc;
  for (int i = 0; i < 4; ++i) {
    lc.push_back(growth_certificate(logi, Sample{{0.3 * i, -0.2 * i}, 1 + i % 2}, ParamBox{{-1, -1}, {1, 1}, 1, 2},
                                    CostParams{1.0}, lo));
  }
  CHECK(lambda_min_for_dataset(lc) == 0.1);
}

TEST_CASE("random stream") {
  Stream a(5), b(5);
  for (int k = 0; k < 10; ++k) CHECK(a.next() == b.next());
  Stream c(9);
  for (int k = 0; k < 1000; ++k) {
    const auto v = c.below(7);
    CHECK(v < 7);
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
