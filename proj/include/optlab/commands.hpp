#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "optlab/evaluation.hpp"
#include "optlab/runconfig.hpp"
#include "optlab/training.hpp"

namespace optlab {

// Command implementations behind the executable, factored out so the same
// logic is callable in-process. Each prints a human summary to `out`,
// writes its artifacts under config.out_dir, and throws on error; file
// outputs are byte-reproducible for a fixed config and seed.

// Synthesizes the option chain CSV; prints row count and date span.
void cmd_generate(const RunConfig& config, std::ostream& out);

// Parses, filters, windows, splits and normalizes the chain; writes the
// split file and prints per-split counts plus the rejection tally.
PrepareResult cmd_prepare(const RunConfig& config, std::ostream& out);

// Trains the model named by config.model_name (informer or lstm) on the
// prepared split; writes a checkpoint and a training-history JSON.
TrainHistory cmd_train(const RunConfig& config, std::ostream& out);

// Runs config.model_name over the test split and writes the metrics report
// and per-step predictions CSV.
MetricsReport cmd_evaluate(const RunConfig& config, std::ostream& out);

// cmd_evaluate plus the trading simulation ledger (trades CSV).
MetricsReport cmd_backtest(const RunConfig& config, std::ostream& out);

// Trains Informer and LSTM, runs every model over the test split, prints
// the three comparison tables and writes one consolidated report.
std::vector<MetricsReport> cmd_compare(const RunConfig& config,
                                       std::ostream& out);

// The five comparable models, in report order.
const std::vector<std::string>& model_roster();

}  // namespace optlab
