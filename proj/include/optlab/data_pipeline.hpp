#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace optlab {

// Calendar date stored as days since 1970-01-01.
struct Date {
  int days = 0;
  auto operator<=>(const Date&) const = default;
};

Date parse_date(const std::string& iso);  // YYYY-MM-DD
std::string format_date(Date d);

enum class OptionType { kCall, kPut };

// One daily quote of one option contract.
struct OptionRecord {
  Date quote_date;
  Date expiry_date;
  double strike = 0;
  OptionType option_type = OptionType::kCall;
  double underlying_price = 0;
  double implied_vol = 0;
  double mid_price = 0;
  long volume = 0;

  int ttm_days() const { return expiry_date.days - quote_date.days; }
  double moneyness() const { return underlying_price / strike; }
  std::string contract_id() const;
};

struct ParseDiagnostic {
  int line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<OptionRecord> records;
  std::vector<ParseDiagnostic> rejected;
};

// Reads the chain CSV (header: quote_date,expiry_date,strike,option_type,
// underlying_price,implied_vol,mid_price,volume). Rows violating record
// invariants are collected with line numbers; throws if the file is missing,
// the header is wrong, or more than 10% of data rows are malformed.
ParseResult parse_chain(const std::string& csv_path);

struct FilterConfig {
  int min_ttm_days = 30;
  double moneyness_lo = 0.6;
  double moneyness_hi = 1.3;
  long min_volume = 1;
  int min_observations = 60;  // T_x + T_y
};

struct FilterReport {
  long rejected_ttm = 0;
  long rejected_moneyness = 0;
  long rejected_volume = 0;
  long rejected_short_series = 0;
  long kept = 0;
};

// Keeps records with TTM >= min_ttm_days, moneyness in
// [moneyness_lo, moneyness_hi] (inclusive bounds) and volume >= min_volume,
// then drops whole contracts left with fewer than min_observations rows.
std::vector<OptionRecord> filter_eligible(const std::vector<OptionRecord>& records,
                                          const FilterConfig& config,
                                          FilterReport* report = nullptr);

// Model feature order; mid_price is also the prediction target.
inline constexpr int kFeatureUnderlying = 0;
inline constexpr int kFeatureImpliedVol = 1;
inline constexpr int kFeatureTtmYears = 2;
inline constexpr int kFeatureStrike = 3;
inline constexpr int kFeatureTypeIndicator = 4;
inline constexpr int kFeatureMidPrice = 5;
inline constexpr int kNumFeatures = 6;

std::vector<double> feature_vector(const OptionRecord& record);

// Per-feature min-max bounds, fitted on the training portion only.
struct NormalizationParams {
  std::vector<double> x_min;
  std::vector<double> x_max;

  int n_features() const { return static_cast<int>(x_min.size()); }
  double transform_one(double value, int feature) const;
  double inverse_one(double value, int feature) const;
  std::vector<double> transform(const std::vector<double>& features) const;
};

// One training/evaluation instance. Raw matrices are kept alongside the
// normalized views so metrics stay in price units.
struct WindowSample {
  std::string contract_id;
  Date start_date;        // first encoder day
  Date end_date;          // last target day
  std::vector<Date> target_dates;           // T_y quote dates
  std::vector<double> encoder_raw;          // T_x x F, row-major
  std::vector<double> encoder_normalized;   // filled by normalize_samples
  std::vector<double> decoder_known_raw;    // last T_label observed mid prices
  std::vector<double> decoder_known_normalized;
  std::vector<double> target_raw;           // T_y future mid prices
  std::vector<double> target_normalized;
  double anchor_price = 0;  // raw mid price at the end of the encoder span
  int t_x = 0, t_y = 0, t_label = 0;
};

// Sliding windows over one contract's chronologically sorted quotes.
// Returns floor((len - T_x - T_y)/stride) + 1 windows (empty when the
// series is too short). Normalized fields are left empty.
std::vector<WindowSample> build_windows(const std::vector<OptionRecord>& series,
                                        int t_x, int t_y, int t_label,
                                        int stride = 1);

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
  NormalizationParams normalizer;
};

// Chronological 70/15/15 split by window-end date. Samples sharing an end
// date never straddle a boundary; validation rounds down on ties.
// Throws if fewer than 3 samples or a split would be empty.
DatasetSplit chrono_split(std::vector<WindowSample> samples,
                          double train_frac = 0.70, double val_frac = 0.15,
                          double test_frac = 0.15);

// Min-max bounds over every encoder row of the given samples.
NormalizationParams fit_normalizer(const std::vector<WindowSample>& train_samples);

// Fills the normalized fields of every sample in place.
void normalize_samples(std::vector<WindowSample>& samples,
                       const NormalizationParams& params);

struct PrepareResult {
  DatasetSplit split;
  FilterReport filter_report;
  long parsed_rows = 0;
  long malformed_rows = 0;
};

// Full pipeline: parse -> filter -> per-contract windows -> chronological
// split -> fit normalizer on train -> normalize all splits.
PrepareResult prepare_dataset(const std::string& csv_path,
                              const FilterConfig& filter, int t_x, int t_y,
                              int t_label, int stride = 1);

// Groups records by contract and sorts each series by quote date.
std::map<std::string, std::vector<OptionRecord>> group_by_contract(
    const std::vector<OptionRecord>& records);

}  // namespace optlab
