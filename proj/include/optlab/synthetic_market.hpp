#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optlab/baselines.hpp"
#include "optlab/data_pipeline.hpp"

namespace optlab {

// Full-truncation Euler path of (S_t, v_t), one step per trading day.
// Deterministic given the seed.
std::vector<std::pair<double, double>> simulate_heston(
    const HestonParams& params, int n_days, double dt, std::uint64_t seed);

// Weekday dates starting at `start` (weekends skipped).
std::vector<Date> trading_calendar(Date start, int n_days);

struct ScenarioConfig {
  // Pricing (risk-neutral) dynamics; quotes come from heston_price on
  // these parameters at the simulated spot and variance.
  HestonParams heston;
  // Physical-measure spot drift: mu plus a mean-reverting risk premium
  // mean_reversion * ln(s0 / S_t). Without it the quote series would be a
  // martingale and no forecast could beat the persistence baseline in
  // conditional mean; the pull keeps price levels stationary so the
  // predictable component survives train/test normalization.
  double mu = 0.02;
  double mean_reversion = 10.0;      // per year
  int n_days = 1200;                 // trading days
  Date start_date = parse_date("2016-01-04");
  int issue_every_days = 120;        // trading days between contract issues
  int expiry_calendar_days = 210;    // contract life in calendar days
  std::vector<double> strike_moneyness = {0.95, 1.05};
  double deep_strike_ratio = 1.9;    // extra strike outside the eligible band
  double zero_volume_prob = 0.05;    // rows left untraded to exercise filters
  double dt = 1.0 / 252.0;
};

// Heston-priced synthetic option chain in the data_pipeline CSV schema.
// Quotes run daily from issue to just before expiry, so short-TTM and
// out-of-band rows are present for the filters to remove.
std::vector<OptionRecord> synthesize_chain(const ScenarioConfig& config,
                                           std::uint64_t seed);

// Emits the exact data_pipeline schema; same records -> byte-identical file.
void write_chain_csv(const std::vector<OptionRecord>& records,
                     const std::string& path);

}  // namespace optlab
