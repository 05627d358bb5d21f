#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "optlab/data_pipeline.hpp"
#include "optlab/informer.hpp"
#include "optlab/lstm.hpp"
#include "optlab/synthetic_market.hpp"
#include "optlab/training.hpp"

namespace optlab {

// Merged view of every knob the command layer needs. Values resolve with
// precedence flag > config file > built-in default; all randomness flows
// from `seed` via named sub-streams (data, init, dropout, shuffle, search).
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";

  ScenarioConfig scenario;
  FilterConfig filter;
  ModelConfig model;
  LstmConfig lstm;
  TrainConfig train;

  // Resolved per command; defaults derive from out_dir when left empty.
  std::string chain_csv;
  std::string split_path;
  std::string checkpoint_path;
  std::string model_name = "informer";

  RunConfig();  // applies the command-level training defaults

  std::uint64_t sub_seed(std::string_view label) const;

  std::string chain_csv_path() const;
  std::string split_file_path() const;
  std::string checkpoint_file_path(const std::string& model) const;
  std::string history_file_path(const std::string& model) const;

  void validate() const;
};

// Flat key=value file (''#'' comments, blank lines ignored). Unknown keys
// are an error so typos do not silently fall back to defaults.
std::map<std::string, std::string> parse_key_value_file(const std::string& path);

// Applies one key=value assignment onto the config; throws on unknown keys
// or unparseable values.
void apply_setting(RunConfig& config, const std::string& key,
                   const std::string& value);

// File settings first, then overrides (command-line flags) on top.
RunConfig load_run_config(const std::string& config_path,
                          const std::map<std::string, std::string>& overrides);

}  // namespace optlab
