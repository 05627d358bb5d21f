#include "optlab/commands.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "optlab/baselines.hpp"
#include "optlab/serialization.hpp"
#include "optlab/synthetic_market.hpp"

namespace optlab {

namespace {

void ensure_out_dir(const RunConfig& config) {
  std::filesystem::create_directories(config.out_dir);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Same ordering backtest() applies internally, so prediction rows written
// alongside a backtest line up with its per-sample outputs.
std::vector<WindowSample> chronological(std::vector<WindowSample> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const WindowSample& a, const WindowSample& b) {
              return std::tie(a.end_date, a.contract_id, a.start_date) <
                     std::tie(b.end_date, b.contract_id, b.start_date);
            });
  return samples;
}

DatasetSplit load_prepared_split(const RunConfig& config) {
  const auto path = config.split_file_path();
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("split file not found: " + path +
                             " (run the prepare command first)");
  }
  return load_split(path);
}

void write_history_json(const std::string& path, const std::string& model,
                        const TrainHistory& history) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["model"] = model;
  doc["train_loss"] = history.train_loss;
  doc["val_loss"] = history.val_loss;
  doc["best_epoch"] = history.best_epoch;
  doc["best_val_loss"] = history.best_val_loss;
  doc["stop_reason"] = history.stop_reason;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
}

void write_trades_csv(const std::string& path,
                      const std::vector<TradeRecord>& trades) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "contract_id,end_date,anchor_price,predicted_final,actual_final,"
         "position,log_return\n";
  for (const auto& t : trades) {
    out << t.contract_id << ',' << format_date(t.end_date) << ','
        << format_double(t.anchor_price) << ','
        << format_double(t.predicted_final) << ','
        << format_double(t.actual_final) << ',' << t.position << ','
        << format_double(t.log_return) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::unique_ptr<TrainableForecaster> make_untrained(const RunConfig& config,
                                                    const std::string& name) {
  Rng init(config.sub_seed("init"));
  if (name == "informer") {
    return std::make_unique<InformerModel>(config.model, init.fork(name));
  }
  if (name == "lstm") {
    return std::make_unique<LstmModel>(config.lstm, init.fork(name));
  }
  throw std::runtime_error("unknown trainable model: " + name +
                           " (expected informer or lstm)");
}

// Builds the forecaster for any roster model; learned models come from
// their checkpoints unless `in_memory` supplies an already-trained one.
Forecaster make_forecaster(const RunConfig& config, const std::string& name,
                           const NormalizationParams& normalizer,
                           std::shared_ptr<TrainableForecaster> in_memory = {}) {
  if (name == "informer" || name == "lstm") {
    std::shared_ptr<TrainableForecaster> model = std::move(in_memory);
    NormalizationParams norm = normalizer;
    if (!model) {
      const auto path = config.checkpoint_file_path(name);
      if (!std::filesystem::exists(path)) {
        throw std::runtime_error("checkpoint not found: " + path +
                                 " (run the train command first)");
      }
      auto loaded = load_checkpoint(path);
      if (loaded.kind != name) {
        throw std::runtime_error("checkpoint " + path + " holds a " +
                                 loaded.kind + " model, expected " + name);
      }
      model = std::move(loaded.model);
      norm = loaded.normalizer;
    }
    return [model, norm](const WindowSample& w) {
      return model->forecast(w, norm);
    };
  }
  if (name == "black_scholes") {
    const int horizon = config.model.t_y;
    const double rate = config.scenario.heston.r;
    return [horizon, rate](const WindowSample& w) {
      return bs_forecast(w, horizon, rate);
    };
  }
  if (name == "heston") {
    const int horizon = config.model.t_y;
    const HestonParams dynamics = config.scenario.heston;
    return [horizon, dynamics](const WindowSample& w) {
      return heston_forecast(w, horizon, dynamics);
    };
  }
  if (name == "persistence") {
    return [](const WindowSample& w) { return persistence_forecast(w); };
  }
  throw std::runtime_error("unknown model: " + name);
}

TrainHistory train_named(const RunConfig& config, const std::string& name,
                         TrainableForecaster& model, const DatasetSplit& split,
                         std::ostream& out) {
  TrainConfig tc = config.train;
  tc.seed = config.seed;  // train_model forks shuffle/dropout streams itself
  out << "training " << name << " (" << model.parameter_count()
      << " parameters, max " << tc.max_epochs << " epochs, patience "
      << tc.patience << ")\n";
  return train_model(model, split, tc, &out);
}

void print_metric_table(std::ostream& out, const std::string& title,
                        const std::vector<MetricsReport>& reports,
                        const std::vector<std::pair<
                            std::string, double MetricsReport::*>>& columns) {
  out << "== " << title << " ==\n";
  out << std::left << std::setw(16) << "model";
  for (const auto& [header, field] : columns) {
    out << std::right << std::setw(14) << header;
  }
  out << "\n";
  out << std::setprecision(4) << std::fixed;
  for (const auto& r : reports) {
    out << std::left << std::setw(16) << r.model;
    for (const auto& [header, field] : columns) {
      out << std::right << std::setw(14) << r.*field;
    }
    out << "\n";
  }
  out << std::defaultfloat << std::setprecision(6) << "\n";
}

MetricsReport evaluate_named(const RunConfig& config, std::ostream& out,
                             bool with_trades) {
  auto split = load_prepared_split(config);
  if (split.test.empty()) throw std::runtime_error("test split is empty");
  const auto samples = chronological(split.test);
  const auto& name = config.model_name;
  auto result = backtest(make_forecaster(config, name, split.normalizer),
                         samples, name);

  ensure_out_dir(config);
  const std::string stem = (with_trades ? "backtest_" : "evaluate_") + name;
  emit_report({result.metrics}, config.out_dir + "/" + stem + ".json");
  emit_predictions_csv(samples, {{name, result.predictions}},
                       config.out_dir + "/" + stem + "_predictions.csv");
  if (with_trades) {
    write_trades_csv(config.out_dir + "/" + stem + "_trades.csv",
                     result.trades);
  }

  print_metric_table(out, "test-set metrics: " + name, {result.metrics},
                     {{"MAE", &MetricsReport::mae},
                      {"RMSE", &MetricsReport::rmse},
                      {"DA%", &MetricsReport::direction_accuracy_pct},
                      {"finalMAE", &MetricsReport::final_day_mae},
                      {"NV", &MetricsReport::net_value}});
  out << "sequences: " << result.metrics.n_sequences << "\n";
  out << "wrote " << config.out_dir << "/" << stem << ".json\n";
  return result.metrics;
}

}  // namespace

const std::vector<std::string>& model_roster() {
  static const std::vector<std::string> roster{
      "informer", "lstm", "black_scholes", "heston", "persistence"};
  return roster;
}

void cmd_generate(const RunConfig& config, std::ostream& out) {
  const auto records = synthesize_chain(config.scenario,
                                        config.sub_seed("data"));
  if (records.empty()) throw std::runtime_error("scenario produced no quotes");
  ensure_out_dir(config);
  const auto path = config.chain_csv_path();
  write_chain_csv(records, path);

  Date lo = records.front().quote_date, hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.quote_date);
    hi = std::max(hi, r.quote_date);
  }
  out << "wrote " << records.size() << " rows to " << path << " ("
      << format_date(lo) << " .. " << format_date(hi) << ")\n";
}

PrepareResult cmd_prepare(const RunConfig& config, std::ostream& out) {
  const auto csv = config.chain_csv_path();
  if (!std::filesystem::exists(csv)) {
    throw std::runtime_error("chain CSV not found: " + csv +
                             " (run the generate command first)");
  }
  auto prepared = prepare_dataset(csv, config.filter, config.model.t_x,
                                  config.model.t_y, config.model.t_label);
  ensure_out_dir(config);
  save_split(config.split_file_path(), prepared.split);

  const auto& fr = prepared.filter_report;
  out << "parsed rows: " << prepared.parsed_rows
      << " (malformed: " << prepared.malformed_rows << ")\n";
  out << "rejected by filter: ttm=" << fr.rejected_ttm
      << " moneyness=" << fr.rejected_moneyness
      << " volume=" << fr.rejected_volume
      << " short_series=" << fr.rejected_short_series << " kept=" << fr.kept
      << "\n";
  out << "windows: train=" << prepared.split.train.size()
      << " validation=" << prepared.split.validation.size()
      << " test=" << prepared.split.test.size() << "\n";
  out << "wrote " << config.split_file_path() << "\n";
  return prepared;
}

TrainHistory cmd_train(const RunConfig& config, std::ostream& out) {
  auto split = load_prepared_split(config);
  const auto& name = config.model_name;
  auto model = make_untrained(config, name);
  auto history = train_named(config, name, *model, split, out);

  ensure_out_dir(config);
  const auto ckpt = config.checkpoint_file_path(name);
  if (name == "informer") {
    save_checkpoint(ckpt, static_cast<InformerModel&>(*model),
                    split.normalizer);
  } else {
    save_checkpoint(ckpt, static_cast<LstmModel&>(*model), split.normalizer);
  }
  write_history_json(config.history_file_path(name), name, history);

  out << "best epoch " << history.best_epoch << " val_loss "
      << history.best_val_loss << " (" << history.stop_reason << ")\n";
  out << "wrote " << ckpt << "\n";
  return history;
}

MetricsReport cmd_evaluate(const RunConfig& config, std::ostream& out) {
  return evaluate_named(config, out, /*with_trades=*/false);
}

MetricsReport cmd_backtest(const RunConfig& config, std::ostream& out) {
  return evaluate_named(config, out, /*with_trades=*/true);
}

std::vector<MetricsReport> cmd_compare(const RunConfig& config,
                                       std::ostream& out) {
  auto split = load_prepared_split(config);
  if (split.test.empty()) throw std::runtime_error("test split is empty");
  const auto samples = chronological(split.test);
  ensure_out_dir(config);

  std::vector<MetricsReport> reports;
  std::map<std::string, std::vector<std::vector<double>>> predictions;
  for (const auto& name : model_roster()) {
    std::shared_ptr<TrainableForecaster> trained;
    if (name == "informer" || name == "lstm") {
      trained = make_untrained(config, name);
      auto history = train_named(config, name, *trained, split, out);
      const auto ckpt = config.checkpoint_file_path(name);
      if (name == "informer") {
        save_checkpoint(ckpt, static_cast<InformerModel&>(*trained),
                        split.normalizer);
      } else {
        save_checkpoint(ckpt, static_cast<LstmModel&>(*trained),
                        split.normalizer);
      }
      write_history_json(config.history_file_path(name), name, history);
    }
    auto result = backtest(
        make_forecaster(config, name, split.normalizer, trained), samples,
        name);
    predictions[name] = std::move(result.predictions);
    reports.push_back(result.metrics);
  }

  emit_report(reports, config.out_dir + "/compare_report.json");
  emit_predictions_csv(samples, predictions,
                       config.out_dir + "/compare_predictions.csv");

  out << "\n";
  print_metric_table(out, "overall prediction metrics", reports,
                     {{"MAE", &MetricsReport::mae},
                      {"RMSE", &MetricsReport::rmse}});
  print_metric_table(out, "final-day metrics", reports,
                     {{"DA%", &MetricsReport::direction_accuracy_pct},
                      {"finalMAE", &MetricsReport::final_day_mae}});
  print_metric_table(out, "net value", reports,
                     {{"NV", &MetricsReport::net_value}});
  out << "sequences per model: " << reports.front().n_sequences << "\n";
  out << "wrote " << config.out_dir << "/compare_report.json\n";
  return reports;
}

}  // namespace optlab
