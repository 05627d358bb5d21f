#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "optlab/data_pipeline.hpp"

namespace optlab {

// Maps a window sample to t_y denormalized price predictions.
using Forecaster = std::function<std::vector<double>(const WindowSample&)>;

struct TradeRecord {
  std::string contract_id;
  Date end_date;
  double anchor_price = 0;     // y_t, last observed price
  double predicted_final = 0;  // prediction for the last horizon day
  double actual_final = 0;     // realized price on the last horizon day
  int position = 0;            // +1 long, -1 short, 0 flat
  double log_return = 0;       // signed log-return contribution
};

struct MetricsReport {
  std::string model;
  double mae = 0;
  double rmse = 0;
  double direction_accuracy_pct = 0;
  double final_day_mae = 0;
  double net_value = 0;
  long n_sequences = 0;
};

// Averages over all horizon steps of all sequences, raw price units.
double mae(const std::vector<double>& predictions,
           const std::vector<double>& actuals);
double rmse(const std::vector<double>& predictions,
            const std::vector<double>& actuals);

// Percentage of sequences whose predicted and realized changes share a
// sign. Both changes zero counts correct; predicted flat against a moving
// price (or vice versa) counts incorrect.
double direction_accuracy(const std::vector<WindowSample>& samples,
                          const std::vector<std::vector<double>>& predictions);

// MAE restricted to the final horizon step.
double final_day_mae(const std::vector<WindowSample>& samples,
                     const std::vector<std::vector<double>>& predictions);

// R = ln(y_final / y_anchor) * sign(predicted_final - y_anchor); flat
// predictions contribute exactly 0.
double sequence_return(double y_anchor, double y_final, double predicted_final);

// NV = 1 + sum of returns (additive, not compounded).
double cumulative_net_value(const std::vector<double>& returns);

struct BacktestResult {
  MetricsReport metrics;
  std::vector<TradeRecord> trades;              // chronological
  std::vector<std::vector<double>> predictions; // per sample, length t_y
};

// Runs the forecaster over every sample (sorted chronologically) and
// assembles all metrics. A forecaster failure aborts with the sample id.
BacktestResult backtest(const Forecaster& forecaster,
                        std::vector<WindowSample> samples,
                        const std::string& model_name);

// JSON report: {"reports": [one object per model]}; stable field order,
// exact double round-trip.
void emit_report(const std::vector<MetricsReport>& reports,
                 const std::string& path);
std::vector<MetricsReport> parse_report(const std::string& path);

// CSV columns: contract_id,date,horizon_step,actual,predicted,model.
// One row per model, sample, horizon step.
void emit_predictions_csv(
    const std::vector<WindowSample>& samples,
    const std::map<std::string, std::vector<std::vector<double>>>&
        predictions_by_model,
    const std::string& path);

}  // namespace optlab
