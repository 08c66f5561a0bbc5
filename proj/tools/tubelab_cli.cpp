#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "tubelab/commands.hpp"
#include "tubelab/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Tubular neighbourhood Laplacians: spectra, semigroup limits and path sampling"};
  app.set_version_flag("--version", tubelab::kVersion);
  app.require_subcommand(1, 1);

  std::string config;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string out;
  std::uint64_t seed = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"validate", "run the property suites"},
      {"sweep", "epsilon sweep of the semigroup error"},
      {"mc", "conditioned path Monte Carlo against the operator route"},
      {"fiber", "fiber Dirichlet spectrum"},
      {"resolvent", "resolvent convergence and variational check"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment YAML")->required()->check(CLI::ExistingFile);
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory, overrides output.directory");
    sub->add_option("--seed", seed, "overrides mc.seed and sweep.field_seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tubelab::kExitConfig;
  }

  tubelab::CommandOptions opt;
  opt.workers = workers;
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) opt.out_dir = out;
  if (sub->count("--seed")) opt.seed = seed;
  return tubelab::run_command(sub->get_name(), config, opt, std::cout, std::cerr);
}
