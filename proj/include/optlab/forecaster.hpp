#pragma once

#include <string>
#include <vector>

#include "optlab/data_pipeline.hpp"
#include "optlab/rng.hpp"
#include "optlab/tensor.hpp"

namespace optlab {

// Per-forward knobs. `rng` drives dropout masks (training) and ProbSparse
// key sampling; when omitted, evaluation falls back to a fixed internal
// stream so repeated forward passes are bit-identical.
struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  // When set, receives every attention weight matrix produced by the pass
  // (softmax outputs, one entry per head per attention sublayer).
  std::vector<Tensor>* attention_weights = nullptr;
};

// A model the training module can optimize: exposes its parameter leaves
// and a differentiable forward pass in normalized target space.
class TrainableForecaster {
 public:
  virtual ~TrainableForecaster() = default;

  virtual std::string name() const = 0;
  virtual std::vector<Tensor> parameters() = 0;
  virtual long parameter_count() const = 0;

  // Normalized-space predictions, t_y x 1, with gradients attached.
  virtual Tensor forward_normalized(const WindowSample& sample,
                                    const ForwardOptions& opts = {}) const = 0;

  // Denormalized price forecast (length t_y), eval mode.
  std::vector<double> forecast(const WindowSample& sample,
                               const NormalizationParams& normalizer) const;
};

}  // namespace optlab
