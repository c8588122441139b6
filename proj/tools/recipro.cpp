// recipro: command-line driver for the recipient-profiling experiments.
//
//   recipro <subcommand> --config <path> [--dataset ID] [--model ID] [--seed N] [--out DIR]
//
// Exit codes: 0 ok, 1 validation error, 2 data error, 3 internal error.
// Logs go to stderr; RECIPRO_LOG=quiet|info|debug sets verbosity.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "recipro/config.hpp"
#include "recipro/driver.hpp"

namespace {

struct Options {
  std::string config;
  recipro::Overrides overrides;
  std::string dataset, model, out;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "run configuration (JSON)")->required();
  cmd->add_option("--dataset", o.dataset, "restrict to one dataset id");
  cmd->add_option("--model", o.model, "restrict to one model id");
  cmd->add_option("--seed", o.seed, "run a single seed");
  cmd->add_option("--out", o.out, "override the output root");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recipro: recipient profiling experiments"};
  app.require_subcommand(1);
  Options opts;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "validate and normalize raw utterance records"},
      {"stats", "corpus statistics"},
      {"prepare", "clean, chunk, balance and split"},
      {"train", "train every configured model for every dataset and seed"},
      {"eval", "in-domain evaluation"},
      {"transfer", "cross-dataset evaluation"},
      {"agree", "pairwise Cohen's kappa between models"},
      {"report", "tables, charts and summary"},
      {"run", "every stage in order"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    auto cfg = recipro::load_config(opts.config);
    if (!opts.dataset.empty()) opts.overrides.dataset = opts.dataset;
    if (!opts.model.empty()) opts.overrides.model = opts.model;
    if (app.get_subcommands().front()->count("--seed")) opts.overrides.seed = opts.seed;
    if (!opts.out.empty()) opts.overrides.out = opts.out;
    recipro::apply_overrides(cfg, opts.overrides);

    recipro::Runner runner(std::move(cfg));
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "ingest") runner.ingest();
    else if (cmd == "stats") runner.stats();
    else if (cmd == "prepare") runner.prepare();
    else if (cmd == "train") runner.train();
    else if (cmd == "eval") runner.eval();
    else if (cmd == "transfer") runner.transfer();
    else if (cmd == "agree") runner.agree();
    else if (cmd == "report") runner.report();
    else runner.run_all();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "[recipro] error: " << e.what() << '\n';
    return recipro::exit_code_for(e);
  }
}
