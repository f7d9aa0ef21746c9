#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "wdro/commands.hpp"
#include "wdro/config.hpp"
#include "wdro/error.hpp"
#include "wdro/parallel.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> bank_seed;
  bool enable_oracle = false;
  bool diagnostics = false;
  int threads = 1;
  std::string record;
};

// flag > file > default
wdro::RunConfig resolve_config(const Flags& f) {
  wdro::RunConfig cfg = wdro::load_config(f.config);
  if (f.seed) cfg.seeds.index = *f.seed;
  if (f.bank_seed) cfg.seeds.bank = *f.bank_seed;
  if (f.enable_oracle) cfg.oracle.enabled = true;
  if (f.diagnostics) cfg.diagnostics = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropically smoothed Wasserstein DRO: training, gradient audits and oracle certification"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) sub->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory (default: $WDRO_OUT_DIR, then ./wdro_out)");
    sub->add_option("--seed", f.seed, "index-sampling seed");
    sub->add_option("--bank-seed", f.bank_seed, "noise bank seed");
    sub->add_flag("--enable-oracle", f.enable_oracle, "enable the brute-force oracle");
    sub->add_flag("--diagnostics", f.diagnostics, "write per-sample softmax diagnostics");
    sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* train = app.add_subcommand("train", "run projected SGD and write the run record");
  auto* check = app.add_subcommand("check-gradients", "finite-difference audit of the smoothed gradients");
  auto* sweep = app.add_subcommand("sweep-beta", "gradient gaps and enlargement membership over (beta, m)");
  auto* certify = app.add_subcommand("certify-critical", "critical-set inclusion and SGD tail certification");
  auto* replay = app.add_subcommand("replay", "rerun a record and byte-compare its artifacts");
  for (auto* sub : {train, check, sweep, certify}) add_common(sub, true);
  replay->add_option("record", f.record, "record.json or the directory holding it")->required();
  replay->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    wdro::set_num_threads(f.threads);
    if (replay->parsed()) {
      const auto r = wdro::cmd_replay(f.record);
      std::cout << r.message << '\n';
      return r.exit_code;
    }
    const wdro::RunConfig cfg = resolve_config(f);
    std::string name;
    for (auto* sub : {train, check, sweep, certify}) {
      if (sub->parsed()) name = sub->get_name();
    }
    const auto r = wdro::run_command(name, cfg);
    const std::string dir = wdro::resolve_out_dir(f.out, cfg);
    wdro::write_artifacts(dir, r.files);
    std::cout << r.message << '\n' << "artifacts in " << dir << '\n';
    return r.exit_code;
  } catch (const wdro::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
