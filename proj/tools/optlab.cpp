#include <exception>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "optlab/commands.hpp"
#include "optlab/runconfig.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

// Registers the flags shared by every subcommand. Flag values land in the
// overrides map so they take precedence over the config file.
void add_common_flags(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path,
                  "key=value configuration file");
  cmd->add_option_function<std::string>(
      "--seed", [&state](const std::string& v) { state.overrides["seed"] = v; },
      "root random seed");
  cmd->add_option_function<std::string>(
      "--out",
      [&state](const std::string& v) { state.overrides["out_dir"] = v; },
      "output directory");
  cmd->add_option_function<std::string>(
      "--set",
      [&state](const std::string& v) {
        const auto eq = v.find('=');
        if (eq == std::string::npos) {
          throw CLI::ValidationError("--set expects key=value, got " + v);
        }
        state.overrides[v.substr(0, eq)] = v.substr(eq + 1);
      },
      "override any config key (key=value), repeatable");
}

void add_model_flag(CLI::App* cmd, CliState& state) {
  cmd->add_option_function<std::string>(
      "--model",
      [&state](const std::string& v) { state.overrides["model_name"] = v; },
      "informer | lstm | black_scholes | heston | persistence");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"option-price forecasting lab"};
  app.require_subcommand(1);
  CliState state;

  auto* generate =
      app.add_subcommand("generate", "synthesize an option-chain CSV");
  add_common_flags(generate, state);
  generate->add_option_function<std::string>(
      "--days",
      [&state](const std::string& v) { state.overrides["scenario.n_days"] = v; },
      "number of trading days");

  auto* prepare = app.add_subcommand(
      "prepare", "filter, window, split and normalize the chain");
  add_common_flags(prepare, state);

  auto* train =
      app.add_subcommand("train", "train a forecaster on the prepared split");
  add_common_flags(train, state);
  add_model_flag(train, state);
  train->add_option_function<std::string>(
      "--epochs",
      [&state](const std::string& v) {
        state.overrides["train.max_epochs"] = v;
      },
      "maximum training epochs");

  auto* evaluate =
      app.add_subcommand("evaluate", "score a model on the test split");
  add_common_flags(evaluate, state);
  add_model_flag(evaluate, state);

  auto* backtest = app.add_subcommand(
      "backtest", "evaluate plus the trading simulation ledger");
  add_common_flags(backtest, state);
  add_model_flag(backtest, state);

  auto* compare = app.add_subcommand(
      "compare", "train and compare every model on one dataset");
  add_common_flags(compare, state);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = optlab::load_run_config(state.config_path,
                                                state.overrides);
    if (generate->parsed()) {
      optlab::cmd_generate(config, std::cout);
    } else if (prepare->parsed()) {
      optlab::cmd_prepare(config, std::cout);
    } else if (train->parsed()) {
      optlab::cmd_train(config, std::cout);
    } else if (evaluate->parsed()) {
      optlab::cmd_evaluate(config, std::cout);
    } else if (backtest->parsed()) {
      optlab::cmd_backtest(config, std::cout);
    } else if (compare->parsed()) {
      optlab::cmd_compare(config, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
