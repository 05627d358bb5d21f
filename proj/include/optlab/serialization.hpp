#pragma once

#include <memory>
#include <string>

#include "optlab/data_pipeline.hpp"
#include "optlab/forecaster.hpp"
#include "optlab/informer.hpp"
#include "optlab/lstm.hpp"
#include "optlab/training.hpp"

namespace optlab {

// Versioned JSON checkpoint: model kind, config, fitted normalizer, and
// every parameter tensor with its shape. Doubles round-trip exactly.
void save_checkpoint(const std::string& path, InformerModel& model,
                     const NormalizationParams& normalizer);
void save_checkpoint(const std::string& path, LstmModel& model,
                     const NormalizationParams& normalizer);

struct LoadedModel {
  std::unique_ptr<TrainableForecaster> model;
  NormalizationParams normalizer;
  std::string kind;  // "informer" or "lstm"
};

LoadedModel load_checkpoint(const std::string& path);

// Versioned JSON dataset split: raw windows plus the train-fitted
// normalizer; normalized views are recomputed on load.
void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

}  // namespace optlab
