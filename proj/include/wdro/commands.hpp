#ifndef WDRO_COMMANDS_HPP
#define WDRO_COMMANDS_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/growth.hpp"
#include "wdro/losses.hpp"
#include "wdro/noise_bank.hpp"
#include "wdro/smoothing.hpp"

namespace wdro {

/// Everything a command needs, resolved from a RunConfig. `config` is the
/// resolved copy: data-derived defaults filled in and the dataset inlined,
/// so it alone reproduces the setup.
struct Setup {
  RunConfig config;
  Dataset data;
  std::unique_ptr<LossModel> model;
  ParamBox box;
  std::vector<GrowthCert> certs;
  CostParams cp;
  RobustnessConfig robust;
  double lambda_min_computed = 0.0;
};

/// Loads the data, certifies every sample and fills in
///   sigma2      = 0.25 * (median pairwise distance)^2   (1.0 when n = 1)
///   cert_lambda = 0.1 * lambda_max, or 0.1 without lambda_max (Lipschitz losses)
///   lambda_min  = max_i lambda_xi,  lambda_max = 100 * lambda_min.
/// Throws ContractError when a configured lambda bound conflicts with the
/// certificates.
Setup build_setup(const RunConfig& config);

NoiseBank make_bank(const Setup& s, std::size_t m);

/// Output file name -> contents. Every command includes record.json.
using Artifacts = std::map<std::string, std::string>;

struct CommandResult {
  int exit_code = 0;
  Artifacts files;
  std::string message;
};

/// Test hook applied to analytic gradients before they are compared.
using GradientHook = std::function<void(GradPair&)>;

CommandResult cmd_train(const RunConfig& config);
CommandResult cmd_check_gradients(const RunConfig& config, const GradientHook& hook = {});
CommandResult cmd_sweep_beta(const RunConfig& config);
CommandResult cmd_certify_critical(const RunConfig& config);
/// Reruns the command stored in <dir>/record.json and byte-compares every
/// listed output. Throws MismatchError on the first differing file.
CommandResult cmd_replay(const std::string& record_path);

/// Dispatches on the command name stored in records.
CommandResult run_command(const std::string& name, const RunConfig& config);

/// --out, then config.out, then $WDRO_OUT_DIR, then "wdro_out".
std::string resolve_out_dir(const std::optional<std::string>& flag, const RunConfig& config);
void write_artifacts(const std::string& dir, const Artifacts& files);

}  // namespace wdro

#endif  // WDRO_COMMANDS_HPP
