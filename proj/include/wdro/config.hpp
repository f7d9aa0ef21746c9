#ifndef WDRO_CONFIG_HPP
#define WDRO_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdro/dataset.hpp"
#include "wdro/optimizer.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// Either a CSV path with a column schema or inline rows.
struct DatasetSpec {
  std::optional<std::string> path;
  ColumnSchema schema;
  std::vector<Sample> rows;
  std::optional<int> num_labels;
};

struct SweepSpec {
  std::vector<double> betas;
  std::vector<std::size_t> ms;
  std::size_t grid = 11;
  double eps = 0.1;
};

struct OracleSpec {
  bool enabled = false;
  std::size_t grid = 0;  // brute-force points per axis, 0 = default
  std::size_t top_k = 5;
  /// Absolute eta for the eta-argmax; unset keeps 1e-6 (1 + |h*|).
  std::optional<double> argmax_tol;
};

struct CertifySpec {
  double eps = 0.1;
  std::vector<std::size_t> grid;  // per coordinate; one entry is broadcast
  double tol = 0.075;             // oracle residual threshold
  std::optional<double> smooth_tol;
  int zoom = 0;
  std::vector<std::uint64_t> sgd_seeds;  // empty: the run's index seed
  std::optional<std::size_t> min_successes;
};

struct ProbeSpec {
  std::size_t count = 100;
  double fd_step = 1e-5;
  std::size_t tables = 1000;
  double tolerance = 1e-4;
};

/// One experiment. Scalars left unset are derived from the data when the
/// setup is built (sigma2, lambda box, cert_lambda).
struct RunConfig {
  std::string loss = "logistic";
  std::vector<std::size_t> architecture;
  DatasetSpec dataset;
  std::vector<double> theta_lo;
  std::vector<double> theta_hi;
  std::optional<double> lambda_min;
  std::optional<double> lambda_max;
  double rho = 0.1;
  double beta = 0.1;
  std::size_t m = 1024;
  std::optional<double> sigma2;
  double kappa = 1.0;
  std::optional<double> cert_lambda;
  std::size_t cert_probes = 10000;
  StepSchedule schedule;
  std::size_t iterations = 10000;
  std::size_t eval_every = 100;
  std::optional<double> residual_tol;
  SeedBundle seeds{1, 2};
  std::optional<ParamPoint> init;
  SweepSpec sweep;
  OracleSpec oracle;
  CertifySpec certify;
  ProbeSpec probes;
  bool diagnostics = false;
  double diagnostics_eta = 1e-3;
  std::size_t thin = 10;
  bool full_trace = false;
  std::optional<std::string> out;

  /// Re-checks every positivity and ordering constraint.
  void validate() const;
};

/// Parses a JSON document; unknown keys and ill-typed values throw
/// ValidationError (syntax errors carry line and column).
RunConfig parse_config(const std::string& text);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
/// Inverse of config_from_json. Datasets are always written inline.
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace wdro

#endif  // WDRO_CONFIG_HPP
