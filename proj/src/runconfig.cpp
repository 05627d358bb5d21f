#include "optlab/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "optlab/rng.hpp"

namespace optlab {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: expected integer for " + key + ", got '" +
                             value + "'");
  }
}

long to_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long parsed = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: expected integer for " + key + ", got '" +
                             value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: expected unsigned integer for " + key +
                             ", got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: expected number for " + key + ", got '" +
                             value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::runtime_error("config: expected true/false for " + key +
                           ", got '" + value + "'");
}

}  // namespace

RunConfig::RunConfig() {
  // Command-level training defaults: the epoch budget is cut from 300 to
  // 60 for desk-scale runs, with the learning rate raised to compensate
  // (1e-4 leaves the model still improving when the budget runs out).
  // The library defaults stay with the training module.
  train.max_epochs = 60;
  train.patience = 10;
  train.learning_rate = 3e-4;
}

std::uint64_t RunConfig::sub_seed(std::string_view label) const {
  return Rng(seed).fork(label).next_u64();
}

std::string RunConfig::chain_csv_path() const {
  return chain_csv.empty() ? out_dir + "/chain.csv" : chain_csv;
}

std::string RunConfig::split_file_path() const {
  return split_path.empty() ? out_dir + "/split.json" : split_path;
}

std::string RunConfig::checkpoint_file_path(const std::string& model) const {
  return checkpoint_path.empty() ? out_dir + "/" + model + "_checkpoint.json"
                                 : checkpoint_path;
}

std::string RunConfig::history_file_path(const std::string& model) const {
  return out_dir + "/" + model + "_history.json";
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw std::runtime_error("config: out_dir is empty");
  scenario.heston.validate();
  model.validate();
  lstm.validate();
  train.validate();
  if (model.t_x != lstm.t_x || model.t_y != lstm.t_y) {
    throw std::runtime_error(
        "config: informer and lstm window lengths must agree");
  }
}

std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> settings;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: " + path + ":" +
                               std::to_string(line_no) +
                               ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: " + path + ":" +
                               std::to_string(line_no) + ": empty key");
    }
    if (!settings.emplace(key, value).second) {
      throw std::runtime_error("config: " + path + ":" +
                               std::to_string(line_no) + ": duplicate key " +
                               key);
    }
  }
  return settings;
}

void apply_setting(RunConfig& c, const std::string& key,
                   const std::string& value) {
  if (key == "seed") c.seed = to_u64(key, value);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "chain_csv") c.chain_csv = value;
  else if (key == "split_path") c.split_path = value;
  else if (key == "checkpoint_path") c.checkpoint_path = value;
  else if (key == "model_name") c.model_name = value;

  else if (key == "scenario.n_days") c.scenario.n_days = to_int(key, value);
  else if (key == "scenario.mu") c.scenario.mu = to_double(key, value);
  else if (key == "scenario.mean_reversion") {
    c.scenario.mean_reversion = to_double(key, value);
  }
  else if (key == "scenario.start_date") c.scenario.start_date = parse_date(value);
  else if (key == "scenario.issue_every_days") {
    c.scenario.issue_every_days = to_int(key, value);
  } else if (key == "scenario.expiry_calendar_days") {
    c.scenario.expiry_calendar_days = to_int(key, value);
  } else if (key == "scenario.deep_strike_ratio") {
    c.scenario.deep_strike_ratio = to_double(key, value);
  } else if (key == "scenario.zero_volume_prob") {
    c.scenario.zero_volume_prob = to_double(key, value);
  }

  else if (key == "heston.s0") c.scenario.heston.s0 = to_double(key, value);
  else if (key == "heston.v0") c.scenario.heston.v0 = to_double(key, value);
  else if (key == "heston.kappa") c.scenario.heston.kappa = to_double(key, value);
  else if (key == "heston.theta") c.scenario.heston.theta = to_double(key, value);
  else if (key == "heston.xi") c.scenario.heston.xi = to_double(key, value);
  else if (key == "heston.rho") c.scenario.heston.rho = to_double(key, value);
  else if (key == "heston.r") c.scenario.heston.r = to_double(key, value);

  else if (key == "filter.min_ttm_days") c.filter.min_ttm_days = to_int(key, value);
  else if (key == "filter.moneyness_lo") c.filter.moneyness_lo = to_double(key, value);
  else if (key == "filter.moneyness_hi") c.filter.moneyness_hi = to_double(key, value);
  else if (key == "filter.min_volume") c.filter.min_volume = to_long(key, value);
  else if (key == "filter.min_observations") {
    c.filter.min_observations = to_int(key, value);
  }

  else if (key == "model.t_x") { c.model.t_x = to_int(key, value); c.lstm.t_x = c.model.t_x; }
  else if (key == "model.t_y") { c.model.t_y = to_int(key, value); c.lstm.t_y = c.model.t_y; }
  else if (key == "model.t_label") c.model.t_label = to_int(key, value);
  else if (key == "model.d_model") c.model.d_model = to_int(key, value);
  else if (key == "model.n_heads") c.model.n_heads = to_int(key, value);
  else if (key == "model.n_encoder_layers") {
    c.model.n_encoder_layers = to_int(key, value);
  } else if (key == "model.n_decoder_layers") {
    c.model.n_decoder_layers = to_int(key, value);
  }
  else if (key == "model.d_ff") c.model.d_ff = to_int(key, value);
  else if (key == "model.dropout") c.model.dropout = to_double(key, value);
  else if (key == "model.attention") {
    if (value == "full") c.model.attention = AttentionKind::kFull;
    else if (value == "probsparse") c.model.attention = AttentionKind::kProbSparse;
    else throw std::runtime_error("config: model.attention must be full or probsparse");
  }
  else if (key == "model.sparsity_factor") c.model.sparsity_factor = to_int(key, value);
  else if (key == "model.distilling") c.model.distilling = to_bool(key, value);

  else if (key == "lstm.hidden_size") c.lstm.hidden_size = to_int(key, value);

  else if (key == "train.batch_size") c.train.batch_size = to_int(key, value);
  else if (key == "train.max_epochs") c.train.max_epochs = to_int(key, value);
  else if (key == "train.learning_rate") c.train.learning_rate = to_double(key, value);
  else if (key == "train.patience") c.train.patience = to_int(key, value);
  else if (key == "train.improvement_threshold") {
    c.train.improvement_threshold = to_double(key, value);
  }

  else {
    throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

RunConfig load_run_config(const std::string& config_path,
                          const std::map<std::string, std::string>& overrides) {
  RunConfig config;
  if (!config_path.empty()) {
    for (const auto& [key, value] : parse_key_value_file(config_path)) {
      apply_setting(config, key, value);
    }
  }
  for (const auto& [key, value] : overrides) {
    apply_setting(config, key, value);
  }
  config.validate();
  return config;
}

}  // namespace optlab
