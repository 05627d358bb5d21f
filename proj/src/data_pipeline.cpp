#include "optlab/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace optlab {

namespace {

// civil <-> serial day conversions (Howard Hinnant's algorithms)
int days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

void civil_from_days(int z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += m <= 2;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Date parse_date(const std::string& iso) {
  int y, m, d;
  if (std::sscanf(iso.c_str(), "%4d-%2d-%2d", &y, &m, &d) != 3 || m < 1 ||
      m > 12 || d < 1 || d > 31) {
    throw std::invalid_argument("parse_date: expected YYYY-MM-DD, got '" + iso + "'");
  }
  return Date{days_from_civil(y, m, d)};
}

std::string format_date(Date date) {
  int y, m, d;
  civil_from_days(date.days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

std::string OptionRecord::contract_id() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%s_%.2f",
                option_type == OptionType::kCall ? "C" : "P",
                format_date(expiry_date).c_str(), strike);
  return buf;
}

ParseResult parse_chain(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("parse_chain: cannot open " + csv_path);

  static const std::string kHeader =
      "quote_date,expiry_date,strike,option_type,underlying_price,"
      "implied_vol,mid_price,volume";
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("parse_chain: empty file (missing header): " + csv_path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw std::runtime_error("parse_chain: unexpected header in " + csv_path);
  }

  ParseResult result;
  int line_no = 1;
  long data_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++data_rows;
    auto reject = [&](const std::string& why) {
      result.rejected.push_back({line_no, why});
    };
    auto fields = split_csv_line(line);
    if (fields.size() != 8) {
      reject("expected 8 fields, got " + std::to_string(fields.size()));
      continue;
    }
    try {
      OptionRecord r;
      r.quote_date = parse_date(fields[0]);
      r.expiry_date = parse_date(fields[1]);
      r.strike = std::stod(fields[2]);
      if (fields[3] == "call") {
        r.option_type = OptionType::kCall;
      } else if (fields[3] == "put") {
        r.option_type = OptionType::kPut;
      } else {
        reject("option_type must be 'call' or 'put'");
        continue;
      }
      r.underlying_price = std::stod(fields[4]);
      r.implied_vol = std::stod(fields[5]);
      r.mid_price = std::stod(fields[6]);
      r.volume = std::stol(fields[7]);
      if (r.expiry_date <= r.quote_date) {
        reject("expiry_date must be after quote_date");
        continue;
      }
      if (r.strike <= 0 || r.underlying_price <= 0 || r.mid_price < 0 ||
          r.implied_vol <= 0 || r.volume < 0) {
        reject("numeric invariant violated");
        continue;
      }
      result.records.push_back(r);
    } catch (const std::exception& e) {
      reject(e.what());
    }
  }
  if (data_rows > 0 &&
      10 * static_cast<long>(result.rejected.size()) > data_rows) {
    throw std::runtime_error("parse_chain: more than 10% of rows malformed in " +
                             csv_path);
  }
  return result;
}

std::vector<OptionRecord> filter_eligible(const std::vector<OptionRecord>& records,
                                          const FilterConfig& config,
                                          FilterReport* report) {
  FilterReport local;
  std::vector<OptionRecord> passed;
  passed.reserve(records.size());
  for (const auto& r : records) {
    if (r.ttm_days() < config.min_ttm_days) {
      ++local.rejected_ttm;
      continue;
    }
    const double m = r.moneyness();
    if (m < config.moneyness_lo || m > config.moneyness_hi) {
      ++local.rejected_moneyness;
      continue;
    }
    if (r.volume < config.min_volume) {
      ++local.rejected_volume;
      continue;
    }
    passed.push_back(r);
  }

  std::map<std::string, long> counts;
  for (const auto& r : passed) ++counts[r.contract_id()];
  std::vector<OptionRecord> kept;
  kept.reserve(passed.size());
  for (const auto& r : passed) {
    if (counts[r.contract_id()] >= config.min_observations) {
      kept.push_back(r);
    } else {
      ++local.rejected_short_series;
    }
  }
  local.kept = static_cast<long>(kept.size());
  if (report) *report = local;
  return kept;
}

std::vector<double> feature_vector(const OptionRecord& r) {
  std::vector<double> f(kNumFeatures);
  f[kFeatureUnderlying] = r.underlying_price;
  f[kFeatureImpliedVol] = r.implied_vol;
  f[kFeatureTtmYears] = r.ttm_days() / 365.0;
  f[kFeatureStrike] = r.strike;
  f[kFeatureTypeIndicator] = r.option_type == OptionType::kCall ? 1.0 : 0.0;
  f[kFeatureMidPrice] = r.mid_price;
  return f;
}

double NormalizationParams::transform_one(double value, int feature) const {
  const double lo = x_min[std::size_t(feature)];
  const double hi = x_max[std::size_t(feature)];
  if (hi == lo) return 0.0;  // degenerate feature maps to constant 0
  return (value - lo) / (hi - lo);
}

double NormalizationParams::inverse_one(double value, int feature) const {
  const double lo = x_min[std::size_t(feature)];
  const double hi = x_max[std::size_t(feature)];
  if (hi == lo) return lo;
  return lo + value * (hi - lo);
}

std::vector<double> NormalizationParams::transform(
    const std::vector<double>& features) const {
  if (static_cast<int>(features.size()) != n_features()) {
    throw std::invalid_argument("NormalizationParams: feature count mismatch");
  }
  std::vector<double> out(features.size());
  for (int j = 0; j < n_features(); ++j) out[std::size_t(j)] = transform_one(features[std::size_t(j)], j);
  return out;
}

std::map<std::string, std::vector<OptionRecord>> group_by_contract(
    const std::vector<OptionRecord>& records) {
  std::map<std::string, std::vector<OptionRecord>> groups;
  for (const auto& r : records) groups[r.contract_id()].push_back(r);
  for (auto& [id, series] : groups) {
    std::sort(series.begin(), series.end(),
              [](const OptionRecord& a, const OptionRecord& b) {
                return a.quote_date < b.quote_date;
              });
  }
  return groups;
}

std::vector<WindowSample> build_windows(const std::vector<OptionRecord>& series,
                                        int t_x, int t_y, int t_label,
                                        int stride) {
  if (t_x < 1 || t_y < 1 || t_label < 0 || t_label > t_x || stride < 1) {
    throw std::invalid_argument("build_windows: invalid window configuration");
  }
  const int len = static_cast<int>(series.size());
  std::vector<WindowSample> windows;
  if (len < t_x + t_y) return windows;

  for (int start = 0; start + t_x + t_y <= len; start += stride) {
    WindowSample w;
    w.t_x = t_x;
    w.t_y = t_y;
    w.t_label = t_label;
    w.contract_id = series[std::size_t(start)].contract_id();
    w.start_date = series[std::size_t(start)].quote_date;
    w.end_date = series[std::size_t(start + t_x + t_y - 1)].quote_date;
    w.encoder_raw.reserve(std::size_t(t_x) * kNumFeatures);
    for (int i = 0; i < t_x; ++i) {
      auto f = feature_vector(series[std::size_t(start + i)]);
      w.encoder_raw.insert(w.encoder_raw.end(), f.begin(), f.end());
    }
    for (int i = t_x - t_label; i < t_x; ++i) {
      w.decoder_known_raw.push_back(series[std::size_t(start + i)].mid_price);
    }
    for (int i = 0; i < t_y; ++i) {
      const auto& r = series[std::size_t(start + t_x + i)];
      w.target_raw.push_back(r.mid_price);
      w.target_dates.push_back(r.quote_date);
    }
    w.anchor_price = series[std::size_t(start + t_x - 1)].mid_price;
    windows.push_back(std::move(w));
  }
  return windows;
}

DatasetSplit chrono_split(std::vector<WindowSample> samples, double train_frac,
                          double val_frac, double test_frac) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("chrono_split: fractions must sum to 1");
  }
  const long n = static_cast<long>(samples.size());
  if (n < 3) throw std::invalid_argument("chrono_split: fewer than 3 samples");

  std::sort(samples.begin(), samples.end(),
            [](const WindowSample& a, const WindowSample& b) {
              if (a.end_date != b.end_date) return a.end_date < b.end_date;
              if (a.contract_id != b.contract_id) return a.contract_id < b.contract_id;
              return a.start_date < b.start_date;
            });

  // validation rounds down first on fractional counts
  long n_train = std::llround(train_frac * n);
  long n_val = static_cast<long>(std::floor(val_frac * n));
  if (n_train + n_val >= n) n_val = std::max<long>(0, n - n_train - 1);

  // never split a window-end date across a boundary
  auto push_past_ties = [&](long boundary) {
    while (boundary > 0 && boundary < n &&
           samples[std::size_t(boundary)].end_date ==
               samples[std::size_t(boundary - 1)].end_date) {
      ++boundary;
    }
    return boundary;
  };
  const long b1 = push_past_ties(n_train);
  const long b2 = push_past_ties(b1 + n_val);
  if (b1 <= 0 || b1 >= n || b2 <= b1 || b2 >= n) {
    throw std::invalid_argument(
        "chrono_split: cannot split chronologically (too many samples share "
        "a window-end date)");
  }

  DatasetSplit split;
  split.train.assign(samples.begin(), samples.begin() + b1);
  split.validation.assign(samples.begin() + b1, samples.begin() + b2);
  split.test.assign(samples.begin() + b2, samples.end());
  return split;
}

NormalizationParams fit_normalizer(const std::vector<WindowSample>& train_samples) {
  if (train_samples.empty()) {
    throw std::invalid_argument("fit_normalizer: no training samples");
  }
  NormalizationParams params;
  params.x_min.assign(kNumFeatures, std::numeric_limits<double>::infinity());
  params.x_max.assign(kNumFeatures, -std::numeric_limits<double>::infinity());
  for (const auto& w : train_samples) {
    const int rows = w.t_x;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < kNumFeatures; ++j) {
        const double v = w.encoder_raw[std::size_t(i) * kNumFeatures + j];
        params.x_min[std::size_t(j)] = std::min(params.x_min[std::size_t(j)], v);
        params.x_max[std::size_t(j)] = std::max(params.x_max[std::size_t(j)], v);
      }
    }
  }
  return params;
}

void normalize_samples(std::vector<WindowSample>& samples,
                       const NormalizationParams& params) {
  for (auto& w : samples) {
    w.encoder_normalized.resize(w.encoder_raw.size());
    for (int i = 0; i < w.t_x; ++i) {
      for (int j = 0; j < kNumFeatures; ++j) {
        const std::size_t k = std::size_t(i) * kNumFeatures + j;
        w.encoder_normalized[k] = params.transform_one(w.encoder_raw[k], j);
      }
    }
    w.decoder_known_normalized.resize(w.decoder_known_raw.size());
    for (std::size_t i = 0; i < w.decoder_known_raw.size(); ++i) {
      w.decoder_known_normalized[i] =
          params.transform_one(w.decoder_known_raw[i], kFeatureMidPrice);
    }
    w.target_normalized.resize(w.target_raw.size());
    for (std::size_t i = 0; i < w.target_raw.size(); ++i) {
      w.target_normalized[i] =
          params.transform_one(w.target_raw[i], kFeatureMidPrice);
    }
  }
}

PrepareResult prepare_dataset(const std::string& csv_path,
                              const FilterConfig& filter, int t_x, int t_y,
                              int t_label, int stride) {
  PrepareResult out;
  auto parsed = parse_chain(csv_path);
  out.parsed_rows = static_cast<long>(parsed.records.size() + parsed.rejected.size());
  out.malformed_rows = static_cast<long>(parsed.rejected.size());

  FilterConfig f = filter;
  f.min_observations = std::max(f.min_observations, t_x + t_y);
  auto eligible = filter_eligible(parsed.records, f, &out.filter_report);
  if (eligible.empty()) {
    throw std::runtime_error("prepare_dataset: zero eligible contracts");
  }

  std::vector<WindowSample> samples;
  for (auto& [id, series] : group_by_contract(eligible)) {
    auto windows = build_windows(series, t_x, t_y, t_label, stride);
    samples.insert(samples.end(), windows.begin(), windows.end());
  }
  if (samples.empty()) {
    throw std::runtime_error("prepare_dataset: no windows after filtering");
  }

  out.split = chrono_split(std::move(samples));
  out.split.normalizer = fit_normalizer(out.split.train);
  normalize_samples(out.split.train, out.split.normalizer);
  normalize_samples(out.split.validation, out.split.normalizer);
  normalize_samples(out.split.test, out.split.normalizer);
  return out;
}

}  // namespace optlab
