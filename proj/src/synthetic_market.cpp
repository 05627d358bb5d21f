#include "optlab/synthetic_market.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "optlab/rng.hpp"

namespace optlab {

namespace {

bool is_weekday(Date d) {
  const int dow = ((d.days % 7) + 7 + 4) % 7;  // 1970-01-01 was a Thursday
  return dow >= 1 && dow <= 5;
}

// shortest round-trip decimal form, locale independent
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

}  // namespace

std::vector<Date> trading_calendar(Date start, int n_days) {
  std::vector<Date> dates;
  dates.reserve(std::size_t(n_days));
  Date d = start;
  while (static_cast<int>(dates.size()) < n_days) {
    if (is_weekday(d)) dates.push_back(d);
    ++d.days;
  }
  return dates;
}

std::vector<std::pair<double, double>> simulate_heston(
    const HestonParams& params, int n_days, double dt, std::uint64_t seed) {
  params.validate();
  if (n_days < 1) throw std::invalid_argument("simulate_heston: n_days must be >= 1");
  Rng rng(seed);
  std::vector<std::pair<double, double>> path;
  path.reserve(std::size_t(n_days));
  double s = params.s0;
  double v = params.v0;
  path.emplace_back(s, v);
  const double rho_c = std::sqrt(1.0 - params.rho * params.rho);
  for (int t = 1; t < n_days; ++t) {
    const double vp = std::max(v, 0.0);
    const double z_s = rng.normal();
    const double z_v = params.rho * z_s + rho_c * rng.normal();
    s *= std::exp((params.r - 0.5 * vp) * dt + std::sqrt(vp * dt) * z_s);
    v += params.kappa * (params.theta - vp) * dt +
         params.xi * std::sqrt(vp * dt) * z_v;
    path.emplace_back(s, v);
  }
  return path;
}

std::vector<OptionRecord> synthesize_chain(const ScenarioConfig& config,
                                           std::uint64_t seed) {
  const auto dates = trading_calendar(config.start_date, config.n_days);
  // The spot evolves under the physical measure: Heston variance, log-spot
  // drifting at mu plus a mean-reverting risk premium. Quotes below are
  // priced under the risk-neutral parameters (drift heston.r).
  config.heston.validate();
  std::vector<std::pair<double, double>> path;
  {
    Rng path_rng = Rng(seed).fork("path");
    const HestonParams& h = config.heston;
    const double rho_c = std::sqrt(1.0 - h.rho * h.rho);
    double s = h.s0, v = h.v0;
    path.reserve(std::size_t(config.n_days));
    path.emplace_back(s, v);
    for (int t = 1; t < config.n_days; ++t) {
      const double vp = std::max(v, 0.0);
      const double z_s = path_rng.normal();
      const double z_v = h.rho * z_s + rho_c * path_rng.normal();
      const double pull = config.mean_reversion * std::log(h.s0 / s);
      s *= std::exp((config.mu + pull - 0.5 * vp) * config.dt +
                    std::sqrt(vp * config.dt) * z_s);
      v += h.kappa * (h.theta - vp) * config.dt +
           h.xi * std::sqrt(vp * config.dt) * z_v;
      path.emplace_back(s, v);
    }
  }
  Rng volume_rng = Rng(seed).fork("volume");

  struct Contract {
    Date expiry;
    double strike;
    OptionType type;
  };
  std::vector<Contract> contracts;
  for (int day = 0; day < config.n_days; day += config.issue_every_days) {
    const double spot = path[std::size_t(day)].first;
    const Date expiry{dates[std::size_t(day)].days + config.expiry_calendar_days};
    for (double m : config.strike_moneyness) {
      const double strike = std::round(spot * m);
      contracts.push_back({expiry, strike, OptionType::kCall});
      contracts.push_back({expiry, strike, OptionType::kPut});
    }
    // one strike far outside the eligible moneyness band
    const double deep = std::round(spot * config.deep_strike_ratio);
    contracts.push_back({expiry, deep, OptionType::kCall});
  }

  std::vector<OptionRecord> records;
  for (int day = 0; day < config.n_days; ++day) {
    const Date today = dates[std::size_t(day)];
    const double spot = path[std::size_t(day)].first;
    const double variance = std::max(path[std::size_t(day)].second, 1e-8);
    for (const auto& c : contracts) {
      const int ttm = c.expiry.days - today.days;
      if (ttm <= 0) continue;
      const int issue_ttm = config.expiry_calendar_days;
      if (ttm > issue_ttm) continue;  // not yet issued

      HestonParams p = config.heston;
      p.s0 = spot;
      p.v0 = variance;
      OptionRecord r;
      r.quote_date = today;
      r.expiry_date = c.expiry;
      r.strike = c.strike;
      r.option_type = c.type;
      r.underlying_price = spot;
      r.implied_vol = std::max(std::sqrt(variance), 1e-4);
      r.mid_price = heston_price(p, c.strike, ttm / 365.0, c.type);
      r.volume = volume_rng.uniform() < config.zero_volume_prob
                     ? 0
                     : 1 + static_cast<long>(volume_rng.index(500));
      records.push_back(r);
    }
  }

  std::sort(records.begin(), records.end(),
            [](const OptionRecord& a, const OptionRecord& b) {
              if (a.quote_date != b.quote_date) return a.quote_date < b.quote_date;
              return a.contract_id() < b.contract_id();
            });
  return records;
}

void write_chain_csv(const std::vector<OptionRecord>& records,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_chain_csv: cannot open " + path);
  out << "quote_date,expiry_date,strike,option_type,underlying_price,"
         "implied_vol,mid_price,volume\n";
  for (const auto& r : records) {
    out << format_date(r.quote_date) << ',' << format_date(r.expiry_date) << ','
        << format_double(r.strike) << ','
        << (r.option_type == OptionType::kCall ? "call" : "put") << ','
        << format_double(r.underlying_price) << ','
        << format_double(r.implied_vol) << ',' << format_double(r.mid_price)
        << ',' << r.volume << '\n';
  }
  if (!out) throw std::runtime_error("write_chain_csv: write failed: " + path);
}

}  // namespace optlab
