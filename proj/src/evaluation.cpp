#include "optlab/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace optlab {

namespace {

int sign_of(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

void check_paired(const std::vector<WindowSample>& samples,
                  const std::vector<std::vector<double>>& predictions,
                  const char* where) {
  if (samples.empty()) {
    throw std::invalid_argument(std::string(where) + ": empty input");
  }
  if (samples.size() != predictions.size()) {
    throw std::invalid_argument(std::string(where) +
                                ": sample/prediction count mismatch");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].target_raw.size() != predictions[i].size()) {
      throw std::invalid_argument(std::string(where) + ": horizon mismatch for " +
                                  samples[i].contract_id);
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double mae(const std::vector<double>& predictions,
           const std::vector<double>& actuals) {
  if (predictions.empty() || predictions.size() != actuals.size()) {
    throw std::invalid_argument("mae: empty input or length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += std::abs(predictions[i] - actuals[i]);
  }
  return total / double(predictions.size());
}

double rmse(const std::vector<double>& predictions,
            const std::vector<double>& actuals) {
  if (predictions.empty() || predictions.size() != actuals.size()) {
    throw std::invalid_argument("rmse: empty input or length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - actuals[i];
    total += e * e;
  }
  return std::sqrt(total / double(predictions.size()));
}

double direction_accuracy(const std::vector<WindowSample>& samples,
                          const std::vector<std::vector<double>>& predictions) {
  check_paired(samples, predictions, "direction_accuracy");
  long correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double anchor = samples[i].anchor_price;
    const double predicted_change = predictions[i].back() - anchor;
    const double actual_change = samples[i].target_raw.back() - anchor;
    if (sign_of(predicted_change) == sign_of(actual_change)) ++correct;
  }
  return 100.0 * double(correct) / double(samples.size());
}

double final_day_mae(const std::vector<WindowSample>& samples,
                     const std::vector<std::vector<double>>& predictions) {
  check_paired(samples, predictions, "final_day_mae");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += std::abs(predictions[i].back() - samples[i].target_raw.back());
  }
  return total / double(samples.size());
}

double sequence_return(double y_anchor, double y_final, double predicted_final) {
  if (y_anchor <= 0.0 || y_final <= 0.0) {
    throw std::invalid_argument("sequence_return: prices must be positive");
  }
  const int position = sign_of(predicted_final - y_anchor);
  if (position == 0) return 0.0;
  return std::log(y_final / y_anchor) * position;
}

double cumulative_net_value(const std::vector<double>& returns) {
  double sum = 0.0;
  for (double r : returns) sum += r;
  return 1.0 + sum;
}

BacktestResult backtest(const Forecaster& forecaster,
                        std::vector<WindowSample> samples,
                        const std::string& model_name) {
  if (samples.empty()) throw std::invalid_argument("backtest: empty test set");
  std::sort(samples.begin(), samples.end(),
            [](const WindowSample& a, const WindowSample& b) {
              return std::tie(a.end_date, a.contract_id, a.start_date) <
                     std::tie(b.end_date, b.contract_id, b.start_date);
            });

  BacktestResult result;
  result.metrics.model = model_name;
  std::vector<double> all_preds, all_actuals, returns;
  for (const auto& sample : samples) {
    std::vector<double> prediction;
    try {
      prediction = forecaster(sample);
    } catch (const std::exception& e) {
      throw std::runtime_error("backtest: forecaster failed on " +
                               sample.contract_id + ": " + e.what());
    }
    if (prediction.size() != sample.target_raw.size()) {
      throw std::runtime_error("backtest: wrong horizon from forecaster on " +
                               sample.contract_id);
    }

    TradeRecord trade;
    trade.contract_id = sample.contract_id;
    trade.end_date = sample.end_date;
    trade.anchor_price = sample.anchor_price;
    trade.predicted_final = prediction.back();
    trade.actual_final = sample.target_raw.back();
    trade.position = sign_of(trade.predicted_final - trade.anchor_price);
    trade.log_return = sequence_return(trade.anchor_price, trade.actual_final,
                                       trade.predicted_final);
    returns.push_back(trade.log_return);
    result.trades.push_back(std::move(trade));

    all_preds.insert(all_preds.end(), prediction.begin(), prediction.end());
    all_actuals.insert(all_actuals.end(), sample.target_raw.begin(),
                       sample.target_raw.end());
    result.predictions.push_back(std::move(prediction));
  }

  result.metrics.mae = mae(all_preds, all_actuals);
  result.metrics.rmse = rmse(all_preds, all_actuals);
  result.metrics.direction_accuracy_pct =
      direction_accuracy(samples, result.predictions);
  result.metrics.final_day_mae = final_day_mae(samples, result.predictions);
  result.metrics.net_value = cumulative_net_value(returns);
  result.metrics.n_sequences = long(samples.size());
  return result;
}

void emit_report(const std::vector<MetricsReport>& reports,
                 const std::string& path) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json item;
    item["model"] = r.model;
    item["mae"] = r.mae;
    item["rmse"] = r.rmse;
    item["direction_accuracy_pct"] = r.direction_accuracy_pct;
    item["final_day_mae"] = r.final_day_mae;
    item["net_value"] = r.net_value;
    item["n_sequences"] = r.n_sequences;
    doc["reports"].push_back(std::move(item));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("emit_report: write failed: " + path);
}

std::vector<MetricsReport> parse_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("parse_report: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<MetricsReport> reports;
  for (const auto& item : doc.at("reports")) {
    MetricsReport r;
    r.model = item.at("model").get<std::string>();
    r.mae = item.at("mae").get<double>();
    r.rmse = item.at("rmse").get<double>();
    r.direction_accuracy_pct = item.at("direction_accuracy_pct").get<double>();
    r.final_day_mae = item.at("final_day_mae").get<double>();
    r.net_value = item.at("net_value").get<double>();
    r.n_sequences = item.at("n_sequences").get<long>();
    reports.push_back(std::move(r));
  }
  return reports;
}

void emit_predictions_csv(
    const std::vector<WindowSample>& samples,
    const std::map<std::string, std::vector<std::vector<double>>>&
        predictions_by_model,
    const std::string& path) {
  for (const auto& [model, predictions] : predictions_by_model) {
    check_paired(samples, predictions, "emit_predictions_csv");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_predictions_csv: cannot open " + path);
  out << "contract_id,date,horizon_step,actual,predicted,model\n";
  for (const auto& [model, predictions] : predictions_by_model) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& sample = samples[i];
      for (std::size_t h = 0; h < predictions[i].size(); ++h) {
        out << sample.contract_id << ','
            << format_date(sample.target_dates[h]) << ',' << (h + 1) << ','
            << format_double(sample.target_raw[h]) << ','
            << format_double(predictions[i][h]) << ',' << model << '\n';
      }
    }
  }
  if (!out) {
    throw std::runtime_error("emit_predictions_csv: write failed: " + path);
  }
}

}  // namespace optlab
