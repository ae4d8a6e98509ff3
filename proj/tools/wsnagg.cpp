#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "wsnagg/cli/run.hpp"

int main(int argc, char** argv) {
  using wsnagg::cli::RunSpec;
  using wsnagg::cli::Subcommand;

  CLI::App app{"wsnagg: private and secure aggregation experiments for sensor networks"};
  app.require_subcommand(1);

  RunSpec spec;
  std::uint64_t seed = 0;
  std::string mode;

  struct Entry {
    const char* name;
    const char* help;
    Subcommand cmd;
  };
  const Entry entries[] = {
      {"keydist", "key-ring connectivity: analytic vs empirical", Subcommand::keydist},
      {"cpda", "one aggregation round per mode over a random deployment", Subcommand::cpda},
      {"attack", "insider attacks on recorded cluster transcripts", Subcommand::attack},
      {"ci-sim", "max-estimation with and without insider detection", Subcommand::ci_sim},
      {"overhead", "messages per node against the closed-form counts", Subcommand::overhead},
  };
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", spec.config_path, "key = value config file (defaults when omitted)");
    sub->add_option("--out", spec.output_path, "CSV destination ('-' for standard output)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--reps", spec.repetitions, "repetitions")->check(CLI::PositiveNumber);
    sub->add_option("--mode", mode, "tag_plain | original | efficient | hardened | all");
    sub->callback([&spec, cmd = e.cmd] { spec.command = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : wsnagg::cli::kConfigError;
  }

  for (const auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) spec.seed = seed;
    if (sub->count("--mode")) spec.mode = mode;
  }
  return wsnagg::cli::run(spec);
}
