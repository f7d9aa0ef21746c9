#include <cmath>

#include "doctest.h"
#include "wdro/cost.hpp"
#include "wdro/error.hpp"
#include "wdro/growth.hpp"
#include "wdro/losses.hpp"
#include "wdro/noise_bank.hpp"
#include "wdro/optimizer.hpp"
#include "wdro/parallel.hpp"
#include "wdro/smoothing.hpp"

using namespace wdro;

namespace {

struct LogisticToy {
  LogisticLoss f{2};
  CostParams cp{1.0};
  RobustnessConfig cfg{0.1, 1.0};
  Dataset data{{Sample{{0.8, 0.4}, 1}, Sample{{-0.6, -0.5}, 2}, Sample{{0.3, -0.9}, 1}, Sample{{-0.2, 0.7}, 2}}, 2};
  ParamBox box{{-2.0, -2.0}, {2.0, 2.0}, 0.5, 3.0};
  NoiseBank bank = sample_noise_bank(256, 2, 2, 0.25, 7);
  std::vector<GrowthCert> certs;

  LogisticToy() {
    CertOptions o;
    o.requested_lambda = 0.5;
    o.num_labels = 2;
    o.probes = 500;
    for (const auto& s : data.samples()) certs.push_back(growth_certificate(f, s, box, cp, o));
  }
};

}  // namespace

TEST_CASE("zero step size freezes the iterates") {
  LogisticToy t;
  StepSchedule zero{0.0, 100.0, true};
  RunOptions o;
  o.iterations = 50;
  o.full_trace = true;
  o.init = ParamPoint{{0.3, -0.2}, 1.4};
  const RunRecord r = sgd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, zero, t.certs, o, {7, 1});
  REQUIRE(r.iterates.size() == 51);
  for (const auto& it : r.iterates) CHECK(it.w == *o.init);
  StepSchedule bad{0.0, 100.0, false};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("one unclamped step and the n = 1 collapse") {
  LogisticToy t;
  RunOptions o;
  o.iterations = 1;
  o.full_trace = true;
  const StepSchedule sched;
  const RunRecord r = full_gd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, sched, t.certs, o, {7, 1});
  REQUIRE(r.iterates.size() == 2);
  CHECK(r.iterates[0].w == ParamPoint{{0.0, 0.0}, 1.75});
  const auto g = full_gradient(t.f, r.iterates[0].w, t.data, t.bank, t.cp, t.cfg);
  CHECK(r.iterates[1].w.theta[0] == doctest::Approx(-0.1 * g.g_theta[0]).epsilon(1e-14));
  CHECK(r.iterates[1].w.lambda == doctest::Approx(1.75 - 0.1 * g.g_lambda).epsilon(1e-14));

  // SGD on a single sample is deterministic projected descent on it.
  const Dataset one({t.data[0]}, 2);
  const std::vector<GrowthCert> c1{t.certs[0]};
  o.iterations = 40;
  const RunRecord s = sgd_run(t.f, one, t.bank, t.box, t.cp, t.cfg, sched, c1, o, {7, 99});
  ParamPoint w = s.iterates[0].w;
  for (std::size_t k = 0; k < 40; ++k) {
    const GradPair gp = grad_pair(t.f, w.theta, w.lambda, one[0], t.bank, t.cp, t.cfg);
    const double a = sched(k);
    for (std::size_t j = 0; j < 2; ++j) w.theta[j] -= a * gp.g_theta[j];
    w.lambda -= a * gp.g_lambda;
    w = project_box(w, t.box);
    CHECK(s.iterates[k + 1].w == w);
  }
}

TEST_CASE("runs are deterministic, thread-independent and feasible") {
  LogisticToy t;
  RunOptions o;
  o.iterations = 300;
  o.eval_every = 50;
  o.full_trace = true;
  t.cfg.beta = 0.05;
  set_num_threads(1);
  const RunRecord a = sgd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, StepSchedule{1.0, 10.0}, t.certs, o, {7, 5});
  set_num_threads(4);
  const RunRecord b = sgd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, StepSchedule{1.0, 10.0}, t.certs, o, {7, 5});
  set_num_threads(1);
  CHECK(iterates_csv(a) == iterates_csv(b));
  CHECK(trace_csv(a) == trace_csv(b));
  for (const auto& it : a.iterates) CHECK(t.box.contains(it.w));
  const RunRecord c = sgd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, StepSchedule{1.0, 10.0}, t.certs, o, {7, 6});
  CHECK(iterates_csv(a) != iterates_csv(c));
}

TEST_CASE("lambda_min contract") {
  LogisticToy t;
  ParamBox low = t.box;
  low.lambda_min = 0.25;
  try {
    check_lambda_contract(low, t.certs);
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("sample 0") != std::string::npos);
  }
  CHECK_THROWS_AS(sgd_run(t.f, t.data, t.bank, low, t.cp, t.cfg, StepSchedule{}, t.certs, RunOptions{}, {}),
                  ContractError);
}

TEST_CASE("full-gradient descent decreases the smoothed objective") {
  LogisticToy t;
  RunOptions o;
  o.iterations = 200;
  o.eval_every = 1;
  o.init = ParamPoint{{1.5, -1.0}, 2.5};
  const RunRecord r = full_gd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, StepSchedule{0.05, 100.0}, t.certs, o, {});
  REQUIRE(r.trace.size() == 201);
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].objective <= r.trace[k - 1].objective + 1e-12);
  CHECK(r.trace.back().residual < r.trace.front().residual);
}

TEST_CASE("criticality residual") {
  LogisticToy t;
  const ParamPoint mid{{0.1, 0.2}, 1.5};
  const auto g = full_gradient(t.f, mid, t.data, t.bank, t.cp, t.cfg).flat();
  double gn = 0.0;
  for (double v : g) gn += v * v;
  // Far from the faces the projection is inactive and the residual is |grad|.
  CHECK(criticality_residual(t.f, mid, t.data, t.bank, t.box, t.cp, t.cfg, 1e-3) ==
        doctest::Approx(std::sqrt(gn)).epsilon(1e-12));

  // With a large rho the lambda-gradient points outward at lambda_min; only
  // the theta part counts there.
  RobustnessConfig big{10.0, 1.0};
  const ParamPoint face{{0.1, 0.2}, t.box.lambda_min};
  const auto gf = full_gradient(t.f, face, t.data, t.bank, t.cp, big);
  REQUIRE(gf.g_lambda > 0.0);
  CHECK(criticality_residual(t.f, face, t.data, t.bank, t.box, t.cp, big, 1e-3) ==
        doctest::Approx(std::hypot(gf.g_theta[0], gf.g_theta[1])).epsilon(1e-12));
  CHECK_THROWS_AS(criticality_residual(t.f, face, t.data, t.bank, t.box, t.cp, big, 0.0), ValidationError);
}

TEST_CASE("tail certification") {
  RunRecord r;
  for (std::size_t k = 0; k <= 100; ++k) r.iterates.push_back({k, ParamPoint{{1.0 - 1.0 / (1.0 + k)}, 1.0}});
  const std::vector<ParamPoint> crit{ParamPoint{{1.0}, 1.0}};
  const CertReport pass = certify_run(r, crit, 0.05);
  CHECK(pass.pass);
  CHECK(pass.tail_count == 11);
  CHECK(pass.tail_distance == doctest::Approx(1.0 / 91.0));
  const std::vector<ParamPoint> shifted{ParamPoint{{1.5}, 1.0}};
  CHECK_FALSE(certify_run(r, shifted, 0.05).pass);
  RunRecord single;
  single.iterates.push_back({0, ParamPoint{{1.0}, 1.0}});
  const CertReport s = certify_run(single, crit, 0.05);
  CHECK(s.pass);
  CHECK(s.tail_count == 1);
  CHECK_THROWS_AS(certify_run(r, std::vector<ParamPoint>{}, 0.05), ValidationError);
}

TEST_CASE("thinning, residual stop and CSV schemas") {
  LogisticToy t;
  RunOptions o;
  o.iterations = 1000;
  o.eval_every = 100;
  o.thin = 10;
  const RunRecord r = sgd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, StepSchedule{}, t.certs, o, {7, 3});
  // Every tenth iterate plus the last 1% (k = 991..1000).
  CHECK(r.iterates.size() == 101 + 9);
  CHECK(r.iterates.back().k == 1000);
  CHECK(r.trace.back().k == 1000);
  CHECK(r.trace.size() == 11);
  const std::string it = iterates_csv(r), tr = trace_csv(r);
  CHECK(it.substr(0, it.find('\n')) == "k,theta_1,theta_2,lambda");
  CHECK(tr.substr(0, tr.find('\n')) == "k,objective,residual,lambda,theta_norm");

  o.residual_tol = 1e9;
  const RunRecord early = sgd_run(t.f, t.data, t.bank, t.box, t.cp, t.cfg, StepSchedule{}, t.certs, o, {7, 3});
  CHECK(early.residual_hit == std::optional<std::size_t>(0));
  CHECK(early.iterations_run == 0);
  CHECK(fmt17(0.1) == "0.10000000000000001");
}
