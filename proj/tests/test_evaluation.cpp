#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "optlab/evaluation.hpp"
#include "optlab/rng.hpp"

using namespace optlab;

namespace {

WindowSample make_eval_sample(const std::string& id, int end_day_offset,
                              double anchor, std::vector<double> targets) {
  WindowSample w;
  w.contract_id = id;
  w.start_date = parse_date("2021-01-04");
  w.end_date = Date{parse_date("2021-03-01").days + end_day_offset};
  w.anchor_price = anchor;
  w.t_y = int(targets.size());
  for (int h = 0; h < w.t_y; ++h) {
    w.target_dates.push_back(Date{w.end_date.days - (w.t_y - 1 - h)});
  }
  w.target_raw = std::move(targets);
  return w;
}

std::vector<WindowSample> fixture_samples() {
  return {
      make_eval_sample("A", 0, 10.0, {10.5, 11.0, 12.0}),  // rises
      make_eval_sample("B", 1, 8.0, {7.5, 7.0, 6.5}),      // falls
      make_eval_sample("C", 2, 5.0, {5.2, 5.1, 5.0}),      // ends flat
  };
}

Forecaster persistence() {
  return [](const WindowSample& w) {
    return std::vector<double>(w.target_raw.size(), w.anchor_price);
  };
}

Forecaster perfect() {
  return [](const WindowSample& w) { return w.target_raw; };
}

// Prediction mirrored around the anchor: anchor - (y - anchor).
Forecaster mirrored() {
  return [](const WindowSample& w) {
    std::vector<double> out;
    for (double y : w.target_raw) out.push_back(2.0 * w.anchor_price - y);
    return out;
  };
}

}  // namespace

TEST_CASE("mae and rmse hand cases") {
  CHECK(mae({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(mae({3, -3}, {0, 0}) == doctest::Approx(3.0));
  CHECK(rmse({3, -3}, {0, 0}) == doctest::Approx(3.0));
  CHECK(mae({0, 4}, {0, 0}) == doctest::Approx(2.0));
  CHECK(rmse({0, 4}, {0, 0}) == doctest::Approx(std::sqrt(8.0)));
  CHECK_THROWS(mae({}, {}));
  CHECK_THROWS(rmse({1}, {1, 2}));
}

TEST_CASE("rmse dominates mae on random error vectors") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> preds(n), actuals(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.uniform(-100, 100);
      actuals[i] = rng.uniform(-100, 100);
    }
    CHECK(rmse(preds, actuals) >= mae(preds, actuals) - 1e-12);
  }
}

TEST_CASE("direction accuracy sign rules") {
  auto samples = fixture_samples();
  // A: actual +2; B: actual -1.5; C: actual 0
  std::vector<std::vector<double>> preds{
      {10.1, 10.2, 10.3},  // predicted up, actual up -> correct
      {8.2, 8.4, 8.6},     // predicted up, actual down -> incorrect
      {5.0, 5.0, 5.0},     // predicted flat, actual flat -> correct
  };
  CHECK(direction_accuracy(samples, preds) ==
        doctest::Approx(100.0 * 2.0 / 3.0));

  // predicted flat against a moving price counts incorrect
  std::vector<std::vector<double>> flat{
      {10.0, 10.0, 10.0}, {8.0, 8.0, 8.0}, {5.0, 5.0, 5.0}};
  CHECK(direction_accuracy(samples, flat) == doctest::Approx(100.0 / 3.0));

  CHECK_THROWS(direction_accuracy({}, {}));
}

TEST_CASE("final day mae restricts to the last step") {
  auto samples = fixture_samples();
  std::vector<std::vector<double>> preds{
      {0.0, 0.0, 12.0},  // noisy interior, perfect final day
      {0.0, 0.0, 6.5},
      {0.0, 0.0, 5.0},
  };
  CHECK(final_day_mae(samples, preds) == 0.0);

  std::vector<std::vector<double>> off{
      {12.0, 12.0, 14.5}, {6.5, 6.5, 6.5}, {5.0, 5.0, 5.0}};
  CHECK(final_day_mae(samples, off) == doctest::Approx(2.5 / 3.0));

  // single-step horizon: final-day MAE is plain MAE
  auto one = make_eval_sample("D", 0, 3.0, {4.0});
  std::vector<std::vector<double>> p{{4.5}};
  CHECK(final_day_mae({one}, p) == doctest::Approx(mae({4.5}, {4.0})));
}

TEST_CASE("sequence return hand cases") {
  const double y_t = 100.0;
  const double y_final = 100.0 * std::exp(0.1);
  CHECK(sequence_return(y_t, y_final, 105.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(sequence_return(y_t, y_final, 95.0) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(sequence_return(y_t, y_final, 100.0) == 0.0);
  CHECK_THROWS(sequence_return(0.0, 1.0, 1.0));
  CHECK_THROWS(sequence_return(1.0, -1.0, 1.0));
}

TEST_CASE("cumulative net value is additive") {
  CHECK(cumulative_net_value({}) == 1.0);
  CHECK(cumulative_net_value({0.1, -0.05, 0.2}) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("backtest on the reference forecasters") {
  auto samples = fixture_samples();

  SUBCASE("persistence is exactly neutral") {
    auto result = backtest(persistence(), samples, "persistence");
    CHECK(result.metrics.net_value == 1.0);
    for (const auto& trade : result.trades) {
      CHECK(trade.position == 0);
      CHECK(trade.log_return == 0.0);
    }
    CHECK(result.metrics.n_sequences == 3);
  }

  SUBCASE("perfect foresight maximizes NV and DA") {
    auto result = backtest(perfect(), samples, "perfect");
    CHECK(result.metrics.mae == 0.0);
    CHECK(result.metrics.direction_accuracy_pct == 100.0);
    double max_nv = 1.0;
    for (const auto& s : samples) {
      max_nv += std::abs(std::log(s.target_raw.back() / s.anchor_price));
    }
    CHECK(result.metrics.net_value == doctest::Approx(max_nv).epsilon(1e-15));
  }

  SUBCASE("mirrored predictor satisfies NV_mirror = 2 - NV") {
    const double nv = backtest(perfect(), samples, "a").metrics.net_value;
    const double nv_mirror = backtest(mirrored(), samples, "b").metrics.net_value;
    CHECK(nv_mirror == 2.0 - nv);
  }

  SUBCASE("records come out in chronological order") {
    auto shuffled = samples;
    std::swap(shuffled[0], shuffled[2]);
    auto result = backtest(persistence(), shuffled, "persistence");
    for (std::size_t i = 1; i < result.trades.size(); ++i) {
      CHECK(result.trades[i - 1].end_date < result.trades[i].end_date);
    }
  }

  SUBCASE("forecaster failure names the sample") {
    Forecaster broken = [](const WindowSample& w) -> std::vector<double> {
      if (w.contract_id == "B") throw std::runtime_error("boom");
      return std::vector<double>(w.target_raw.size(), w.anchor_price);
    };
    CHECK_THROWS_WITH_AS(backtest(broken, samples, "x"),
                         doctest::Contains("B"), std::runtime_error);
  }

  SUBCASE("empty test set rejected") {
    CHECK_THROWS(backtest(persistence(), {}, "x"));
  }
}

TEST_CASE("scaling prices preserves directions and returns") {
  auto samples = fixture_samples();
  const double c = 3.75;
  auto scaled_samples = samples;
  for (auto& s : scaled_samples) {
    s.anchor_price *= c;
    for (double& y : s.target_raw) y *= c;
  }
  Forecaster noisy = [](const WindowSample& w) {
    std::vector<double> out;
    for (std::size_t h = 0; h < w.target_raw.size(); ++h) {
      out.push_back(w.anchor_price * (1.0 + 0.01 * double(h + 1)));
    }
    return out;
  };
  auto base = backtest(noisy, samples, "m");
  auto scaled = backtest(noisy, scaled_samples, "m");
  CHECK(scaled.metrics.direction_accuracy_pct ==
        base.metrics.direction_accuracy_pct);
  CHECK(scaled.metrics.net_value == doctest::Approx(base.metrics.net_value).epsilon(1e-12));
  CHECK(scaled.metrics.n_sequences == base.metrics.n_sequences);
  CHECK(scaled.metrics.mae == doctest::Approx(c * base.metrics.mae).epsilon(1e-12));
  CHECK(scaled.metrics.rmse == doctest::Approx(c * base.metrics.rmse).epsilon(1e-12));
}

TEST_CASE("report emission round trip") {
  auto tmp = std::filesystem::temp_directory_path();
  const auto path = (tmp / "optlab_report.json").string();

  SUBCASE("empty model list") {
    emit_report({}, path);
    CHECK(parse_report(path).empty());
  }

  SUBCASE("values round trip exactly") {
    MetricsReport a;
    a.model = "informer";
    a.mae = 2.7145;
    a.rmse = 3.6766;
    a.direction_accuracy_pct = 54.43;
    a.final_day_mae = 2.9709;
    a.net_value = 1.3;
    a.n_sequences = 311;
    MetricsReport b;
    b.model = "persistence";
    b.mae = 1.0 / 3.0;
    b.rmse = std::sqrt(2.0);
    b.direction_accuracy_pct = 100.0 * 2.0 / 3.0;
    b.final_day_mae = 0.1234567890123456789;
    b.net_value = 1.0;
    b.n_sequences = 7;
    emit_report({a, b}, path);
    auto parsed = parse_report(path);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].model == "informer");
    CHECK(parsed[0].mae == a.mae);
    CHECK(parsed[0].rmse == a.rmse);
    CHECK(parsed[1].direction_accuracy_pct == b.direction_accuracy_pct);
    CHECK(parsed[1].final_day_mae == b.final_day_mae);
    CHECK(parsed[1].net_value == b.net_value);
    CHECK(parsed[1].n_sequences == 7);
  }
}

TEST_CASE("prediction CSV layout") {
  auto samples = fixture_samples();
  std::map<std::string, std::vector<std::vector<double>>> by_model;
  by_model["persistence"] = backtest(persistence(), samples, "p").predictions;
  by_model["perfect"] = backtest(perfect(), samples, "q").predictions;

  auto tmp = std::filesystem::temp_directory_path();
  const auto path = (tmp / "optlab_predictions.csv").string();
  emit_predictions_csv(samples, by_model, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "contract_id,date,horizon_step,actual,predicted,model");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 3 * 3);  // 2 models x 3 samples x 3 horizon steps
}
