#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "wdro/commands.hpp"
#include "wdro/config.hpp"
#include "wdro/error.hpp"
#include "wdro/oracle.hpp"
#include "wdro/parallel.hpp"

using namespace wdro;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wdro_harness_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string header(const std::string& csv) { return csv.substr(0, csv.find('\n')); }

json logistic_toy() {
  return json::parse(R"({
    "loss": "logistic",
    "dataset": {"rows": [{"x": [0.8, 0.4], "y": 1}, {"x": [-0.6, -0.5], "y": 2},
                         {"x": [0.3, -0.9], "y": 1}, {"x": [-0.2, 0.7], "y": 2}]},
    "box": {"theta_lo": -2, "theta_hi": 2, "lambda_max": 3},
    "rho": 0.1, "beta": 0.5, "m": 128, "cert_probes": 500,
    "iterations": 200, "eval_every": 50,
    "probes": {"count": 10, "tables": 50}
  })");
}

// Single-sample linear regression with a known critical point at (0, lambda_min).
json linreg_toy() {
  return json::parse(R"({
    "loss": "linreg",
    "dataset": {"rows": [{"x": [1.0], "y": 1, "target": 0.0}]},
    "box": {"theta_lo": -0.5, "theta_hi": 0.5, "lambda_max": 5.0},
    "rho": 0.1, "beta": 0.01, "m": 2000, "sigma2": 1.0, "cert_probes": 500,
    "iterations": 300,
    "sweep": {"betas": [0.01], "ms": [2000], "grid": 5, "eps": 0.2},
    "oracle": {"enabled": true},
    "certify": {"eps": 0.1, "grid": 21, "tol": 0.075}
  })");
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("WDRO_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "WDRO_CLI must point at the wdro binary");
  const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = config_from_json(logistic_toy());
  CHECK(c.loss == "logistic");
  CHECK(c.theta_lo == std::vector<double>{-2.0});
  CHECK(c.lambda_max == std::optional<double>(3.0));
  CHECK(c.dataset.rows.size() == 4);
  CHECK(c.seeds.bank == 1);

  json bad = logistic_toy();
  bad["learning_rate"] = 0.1;
  CHECK_THROWS_AS(config_from_json(bad), ValidationError);
  bad = logistic_toy();
  bad["sweep"] = {{"betas", {0.1}}, {"gird", 3}};
  CHECK_THROWS_AS(config_from_json(bad), ValidationError);
  bad = logistic_toy();
  bad["rho"] = "large";
  CHECK_THROWS_AS(config_from_json(bad), ValidationError);

  try {
    parse_config("{\n  \"loss\": \"logistic\",\n  \"rho\": ,\n}");
    FAIL("expected a syntax error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
  }

  // Round trip through the JSON form.
  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("output directory precedence") {
  RunConfig c = config_from_json(logistic_toy());
  ::unsetenv("WDRO_OUT_DIR");
  CHECK(resolve_out_dir(std::nullopt, c) == "wdro_out");
  ::setenv("WDRO_OUT_DIR", "/tmp/from_env", 1);
  CHECK(resolve_out_dir(std::nullopt, c) == "/tmp/from_env");
  c.out = "from_config";
  CHECK(resolve_out_dir(std::nullopt, c) == "from_config");
  CHECK(resolve_out_dir(std::string("from_flag"), c) == "from_flag");
  ::unsetenv("WDRO_OUT_DIR");
}

TEST_CASE("train") {
  const RunConfig c = config_from_json(logistic_toy());
  const CommandResult r = cmd_train(c);
  CHECK(r.exit_code == 0);
  REQUIRE(r.files.count("trace.csv"));
  REQUIRE(r.files.count("iterates.csv"));
  CHECK(header(r.files.at("trace.csv")) == "k,objective,residual,lambda,theta_norm");
  CHECK(header(r.files.at("iterates.csv")) == "k,theta_1,theta_2,lambda");
  const json rec = json::parse(r.files.at("record.json"));
  CHECK(rec["command"] == "train");
  CHECK(rec["seeds"]["bank"] == 1);
  CHECK(rec["config"]["dataset"]["rows"].size() == 4);

  RunConfig d = c;
  d.diagnostics = true;
  const CommandResult rd = cmd_train(d);
  REQUIRE(rd.files.count("diagnostics.csv"));
  CHECK(header(rd.files.at("diagnostics.csv")) == "i,h_max,phi,mass,entropy,ess");

  // lambda_max must lie above the certified lambda_min.
  RunConfig low = c;
  low.cert_lambda = 0.5;
  low.lambda_max = 0.2;
  CHECK_THROWS_AS(cmd_train(low), ContractError);
  RunConfig below = c;
  below.lambda_min = 0.1;
  CHECK_THROWS_AS(cmd_train(below), ContractError);
}

TEST_CASE("check-gradients") {
  RunConfig c = config_from_json(logistic_toy());
  const CommandResult r = cmd_check_gradients(c);
  CHECK(r.exit_code == 0);
  CHECK(header(r.files.at("gradients.csv")) == "probe,sample,theta_1,theta_2,lambda,rel_err_pair,rel_err_full");
  CHECK(header(r.files.at("laws.csv")) == "table,m,beta_lo,beta_hi,h_max,phi_lo,phi_hi,sandwich_ok,monotone_ok");
  CHECK(header(r.files.at("concentration.csv")) == "beta,mass,entropy,ess");
  const json rec = json::parse(r.files.at("record.json"));
  CHECK(rec["verdicts"]["gradients_pass"] == true);
  CHECK(rec["verdicts"]["law_failures"] == 0);

  // A corrupted gradient is caught.
  const CommandResult bad = cmd_check_gradients(c, [](GradPair& g) { g.g_lambda += 1e-2; });
  CHECK(bad.exit_code == 1);
  CHECK(json::parse(bad.files.at("record.json"))["verdicts"]["gradients_pass"] == false);

  c.probes.count = 0;
  CHECK_THROWS_AS(cmd_check_gradients(c), ValidationError);
}

TEST_CASE("sweep-beta singleton matches a direct evaluation") {
  const RunConfig c = config_from_json(linreg_toy());
  const CommandResult r = cmd_sweep_beta(c);
  CHECK(r.exit_code == 0);
  const std::string csv = r.files.at("sweep.csv");
  CHECK(header(csv) == "beta,m,sup_gap,member_fraction");

  const Setup s = build_setup(c);
  const NoiseBank bank = make_bank(s, 2000);
  std::vector<CompactWindow> windows{compact_window(s.certs[0], *s.model, s.box, s.cp, 1)};
  const ObjectiveOracle oracle(*s.model, s.data, windows, s.cp, s.robust.rho);
  const SubdiffField field = [&](const ParamPoint& w) { return oracle.subdiff(w); };
  std::size_t members = 0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const ParamPoint w{{-0.5 + 0.25 * i}, s.box.lambda_min + (s.box.lambda_max - s.box.lambda_min) * 0.25 * j};
      const auto g = full_gradient(*s.model, w, s.data, bank, s.cp, s.robust).flat();
      members += enlargement_member(g, w, 0.2, field, probe_lattice(w, 0.2, s.box, 0.05)) ? 1 : 0;
    }
  }
  const std::string expect = fmt17(0.01) + ",2000,0," + fmt17(static_cast<double>(members) / 25.0) + "\n";
  CHECK(csv.substr(csv.find('\n') + 1) == expect);
}

TEST_CASE("certify-critical") {
  RunConfig c = config_from_json(linreg_toy());
  c.oracle.enabled = false;
  CHECK_THROWS_AS(cmd_certify_critical(c), ValidationError);

  // An eps of ten box diameters makes every inclusion trivially true.
  c = config_from_json(linreg_toy());
  const Setup s = build_setup(c);
  c.certify.eps = 10.0 * s.box.diameter();
  c.certify.grid = {11};
  const CommandResult r = cmd_certify_critical(c);
  CHECK(r.exit_code == 0);
  const json v = json::parse(r.files.at("record.json"))["verdicts"];
  CHECK(v["extreme_cell"]["included"] == true);
  CHECK(v["sgd_pass"] == true);
  CHECK(header(r.files.at("inclusion.csv")) == "beta,m,points,hausdorff,included");
  CHECK(header(r.files.at("crit_oracle.csv")) == "theta_1,lambda,residual");
  CHECK(header(r.files.at("sgd.csv")) ==
        "seed,iterations_run,residual_hit,final_residual,tail_distance,tail_count,success");
}

TEST_CASE("replay") {
  const fs::path dir = scratch("replay");
  const RunConfig c = config_from_json(logistic_toy());
  set_num_threads(1);
  write_artifacts(dir.string(), cmd_train(c).files);
  set_num_threads(3);
  CHECK(cmd_replay(dir.string()).exit_code == 0);
  set_num_threads(1);

  const std::string original = slurp(dir / "record.json");
  json rec = json::parse(original);
  rec["seeds"]["index"] = 99;
  spit(dir / "record.json", rec.dump(2) + "\n");
  CHECK_THROWS_AS(cmd_replay((dir / "record.json").string()), MismatchError);

  rec = json::parse(original);
  rec["loss"] = "linreg";
  spit(dir / "record.json", rec.dump(2) + "\n");
  CHECK_THROWS_AS(cmd_replay(dir.string()), ValidationError);

  spit(dir / "record.json", original);
  spit(dir / "trace.csv", slurp(dir / "trace.csv") + "tampered\n");
  CHECK_THROWS_AS(cmd_replay(dir.string()), MismatchError);
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = scratch("cli");
  spit(dir / "ok.json", logistic_toy().dump());
  json low = logistic_toy();
  low["cert_lambda"] = 0.5;
  low["box"]["lambda_max"] = 0.2;
  spit(dir / "low.json", low.dump());
  spit(dir / "broken.json", "{\"loss\": ");

  CHECK(run_cli("train --config " + (dir / "ok.json").string() + " --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "record.json"));
  CHECK(run_cli("replay " + (dir / "run").string() + " --threads 2") == 0);
  CHECK(run_cli("train --config " + (dir / "ok.json").string() + " --seed 7 --out " + (dir / "seeded").string()) ==
        0);
  CHECK(json::parse(slurp(dir / "seeded" / "record.json"))["seeds"]["index"] == 7);

  CHECK(run_cli("train --config " + (dir / "low.json").string() + " --out " + (dir / "x").string()) == 3);
  CHECK(run_cli("train --config " + (dir / "broken.json").string()) == 2);
  CHECK(run_cli("train --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("certify-critical --config " + (dir / "ok.json").string() + " --out " + (dir / "y").string()) == 2);
  CHECK(run_cli("") == 2);

  json rec = json::parse(slurp(dir / "run" / "record.json"));
  rec["seeds"]["bank"] = 12345;
  spit(dir / "run" / "record.json", rec.dump(2) + "\n");
  CHECK(run_cli("replay " + (dir / "run").string()) == 5);
}
