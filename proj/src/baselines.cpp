#include "optlab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace optlab {

namespace {

// 128-node Gauss-Legendre rule on [-1, 1], nodes by Newton iteration.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) {
    nodes.resize(std::size_t(n));
    weights.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        pp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[std::size_t(i)] = x;
      weights[std::size_t(i)] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
  }
};

const GaussLegendre& gl128() {
  static const GaussLegendre rule(128);
  return rule;
}

double intrinsic_value(double spot, double strike, double rate, double tau,
                       OptionType type) {
  const double kd = strike * std::exp(-rate * tau);
  return type == OptionType::kCall ? std::max(spot - kd, 0.0)
                                   : std::max(kd - spot, 0.0);
}

// P_j probability of the Heston semi-closed form, branch-cut-stable
// ("little trap") characteristic function.
double heston_probability(const HestonParams& p, double strike, double tau,
                          int j) {
  const std::complex<double> i(0.0, 1.0);
  const double xi = std::max(p.xi, 1e-4);  // keep xi^2 denominators stable
  const double a = p.kappa * p.theta;
  const double b = (j == 1) ? p.kappa - p.rho * xi : p.kappa;
  const double u = (j == 1) ? 0.5 : -0.5;
  const double x = std::log(p.s0);
  const double lk = std::log(strike);

  const auto& rule = gl128();
  // panelized Gauss-Legendre: deep out-of-the-money, short-dated quotes are
  // ~1e-6, so both the node resolution and the truncation tail of the
  // integral must sit well below that
  constexpr double kLo = 1e-8, kHi = 400.0;
  constexpr int kPanels = 16;
  const double width = (kHi - kLo) / kPanels;

  double integral = 0.0;
  for (int panel = 0; panel < kPanels; ++panel) {
    const double lo = kLo + panel * width;
    const double half = 0.5 * width;
    const double mid = lo + half;
    for (std::size_t n = 0; n < rule.nodes.size(); ++n) {
      const double phi = mid + half * rule.nodes[n];
      const std::complex<double> rxip = p.rho * xi * phi * i;
      const std::complex<double> d = std::sqrt(
          (rxip - b) * (rxip - b) - xi * xi * (2.0 * u * phi * i - phi * phi));
      const std::complex<double> c = (b - rxip - d) / (b - rxip + d);
      const std::complex<double> edt = std::exp(-d * tau);
      const std::complex<double> big_c =
          p.r * phi * i * tau +
          (a / (xi * xi)) *
              ((b - rxip - d) * tau - 2.0 * std::log((1.0 - c * edt) / (1.0 - c)));
      const std::complex<double> big_d =
          ((b - rxip - d) / (xi * xi)) * ((1.0 - edt) / (1.0 - c * edt));
      const std::complex<double> f = std::exp(big_c + big_d * p.v0 + i * phi * x);
      const std::complex<double> integrand =
          std::exp(-i * phi * lk) * f / (i * phi);
      if (!std::isfinite(integrand.real())) {
        throw std::runtime_error("heston_price: non-finite integrand at phi=" +
                                 std::to_string(phi));
      }
      integral += rule.weights[n] * integrand.real() * half;
    }
  }
  return 0.5 + integral / M_PI;
}

struct LastObservation {
  double spot, implied_vol, ttm_years, strike;
  OptionType type;
};

LastObservation last_observation(const WindowSample& sample) {
  if (sample.encoder_raw.size() != std::size_t(sample.t_x) * kNumFeatures) {
    throw std::invalid_argument("forecast: sample missing raw encoder features");
  }
  const std::size_t off = std::size_t(sample.t_x - 1) * kNumFeatures;
  LastObservation obs;
  obs.spot = sample.encoder_raw[off + kFeatureUnderlying];
  obs.implied_vol = sample.encoder_raw[off + kFeatureImpliedVol];
  obs.ttm_years = sample.encoder_raw[off + kFeatureTtmYears];
  obs.strike = sample.encoder_raw[off + kFeatureStrike];
  obs.type = sample.encoder_raw[off + kFeatureTypeIndicator] > 0.5
                 ? OptionType::kCall
                 : OptionType::kPut;
  return obs;
}

}  // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

double bs_price(const BsInputs& in) {
  if (in.spot <= 0 || in.strike <= 0 || in.vol < 0 || in.tau < 0) {
    throw std::invalid_argument("bs_price: invalid inputs");
  }
  if (in.tau == 0.0 || in.vol == 0.0) {
    return intrinsic_value(in.spot, in.strike, in.rate, in.tau, in.type);
  }
  const double st = in.vol * std::sqrt(in.tau);
  const double d1 =
      (std::log(in.spot / in.strike) + (in.rate + 0.5 * in.vol * in.vol) * in.tau) / st;
  const double d2 = d1 - st;
  const double kd = in.strike * std::exp(-in.rate * in.tau);
  if (in.type == OptionType::kCall) {
    return in.spot * norm_cdf(d1) - kd * norm_cdf(d2);
  }
  return kd * norm_cdf(-d2) - in.spot * norm_cdf(-d1);
}

void HestonParams::validate() const {
  if (s0 <= 0 || v0 < 0 || kappa < 0 || theta < 0 || xi < 0 ||
      std::abs(rho) > 1.0) {
    throw std::invalid_argument("HestonParams: invariant violated");
  }
}

double heston_price(const HestonParams& params, double strike, double tau,
                    OptionType type) {
  params.validate();
  if (strike <= 0 || tau <= 0) {
    throw std::invalid_argument("heston_price: requires strike > 0 and tau > 0");
  }
  const double p1 = heston_probability(params, strike, tau, 1);
  const double p2 = heston_probability(params, strike, tau, 2);
  const double kd = strike * std::exp(-params.r * tau);
  // the P1/P2 difference cancels catastrophically for near-worthless
  // options (absolute error ~1e-7), so enforce the no-arbitrage bounds
  const double call = std::clamp(params.s0 * p1 - kd * p2,
                                 std::max(params.s0 - kd, 0.0), params.s0);
  if (type == OptionType::kCall) return call;
  return std::clamp(call - params.s0 + kd, std::max(kd - params.s0, 0.0), kd);
}

std::vector<double> bs_forecast(const WindowSample& sample, int horizon,
                                double rate) {
  const auto obs = last_observation(sample);
  std::vector<double> prices;
  prices.reserve(std::size_t(horizon));
  for (int h = 1; h <= horizon; ++h) {
    const double tau = obs.ttm_years - h / 365.0;
    if (tau <= 0.0) {
      prices.push_back(intrinsic_value(obs.spot, obs.strike, rate, 0.0, obs.type));
      continue;
    }
    prices.push_back(bs_price(
        {obs.spot, obs.strike, rate, obs.implied_vol, tau, obs.type}));
  }
  return prices;
}

std::vector<double> heston_forecast(const WindowSample& sample, int horizon,
                                    const HestonParams& dynamics) {
  const auto obs = last_observation(sample);
  HestonParams p = dynamics;
  p.s0 = obs.spot;
  p.v0 = obs.implied_vol * obs.implied_vol;
  p.theta = p.v0;  // long-run variance pinned to the last observed level
  std::vector<double> prices;
  prices.reserve(std::size_t(horizon));
  for (int h = 1; h <= horizon; ++h) {
    const double tau = obs.ttm_years - h / 365.0;
    if (tau <= 0.0) {
      prices.push_back(intrinsic_value(obs.spot, obs.strike, p.r, 0.0, obs.type));
      continue;
    }
    prices.push_back(heston_price(p, obs.strike, tau, obs.type));
  }
  return prices;
}

std::vector<double> persistence_forecast(const WindowSample& sample) {
  return std::vector<double>(std::size_t(sample.t_y), sample.anchor_price);
}

}  // namespace optlab
