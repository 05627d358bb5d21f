#pragma once

#include <vector>

#include "optlab/data_pipeline.hpp"

namespace optlab {

struct BsInputs {
  double spot = 0;
  double strike = 0;
  double rate = 0;
  double vol = 0;
  double tau = 0;  // years
  OptionType type = OptionType::kCall;
};

// Standard normal CDF, |error| < 1e-12.
double norm_cdf(double x);

// Black-Scholes closed form. tau == 0 or vol == 0 falls back to the
// discounted intrinsic value.
double bs_price(const BsInputs& inputs);

struct HestonParams {
  double s0 = 100.0;
  double v0 = 0.04;     // instantaneous variance
  double kappa = 2.0;   // mean reversion speed
  double theta = 0.04;  // long-run variance
  double xi = 0.3;      // vol of vol
  double rho = -0.7;
  double r = 0.02;

  void validate() const;
};

// Semi-closed-form Heston price: P1/P2 characteristic-function integrals on
// a branch-cut-stable formulation, panelized Gauss-Legendre quadrature on
// [1e-8, 400], outputs clamped to the no-arbitrage band. Puts via put-call
// parity. Requires tau > 0.
double heston_price(const HestonParams& params, double strike, double tau,
                    OptionType type);

// Frozen-spot forecast protocol: spot and vol held at the last observed
// values, tau decays by h/365 per horizon step; clamps to discounted
// intrinsic value once tau reaches zero.
std::vector<double> bs_forecast(const WindowSample& sample, int horizon,
                                double rate);

std::vector<double> heston_forecast(const WindowSample& sample, int horizon,
                                    const HestonParams& dynamics);

// Repeats the last observed mid price.
std::vector<double> persistence_forecast(const WindowSample& sample);

}  // namespace optlab
