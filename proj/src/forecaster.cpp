#include "optlab/forecaster.hpp"

namespace optlab {

std::vector<double> TrainableForecaster::forecast(
    const WindowSample& sample, const NormalizationParams& normalizer) const {
  const Tensor normalized = forward_normalized(sample);
  std::vector<double> prices;
  prices.reserve(std::size_t(normalized.rows()));
  for (int i = 0; i < normalized.rows(); ++i) {
    prices.push_back(normalizer.inverse_one(normalized.at(i, 0), kFeatureMidPrice));
  }
  return prices;
}

}  // namespace optlab
