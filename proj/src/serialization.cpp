#include "optlab/serialization.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace optlab {

namespace {

using json = nlohmann::ordered_json;

json normalizer_to_json(const NormalizationParams& n) {
  return json{{"x_min", n.x_min}, {"x_max", n.x_max}};
}

NormalizationParams normalizer_from_json(const nlohmann::json& j) {
  NormalizationParams n;
  n.x_min = j.at("x_min").get<std::vector<double>>();
  n.x_max = j.at("x_max").get<std::vector<double>>();
  if (n.x_min.size() != n.x_max.size()) {
    throw std::runtime_error("normalizer: min/max length mismatch");
  }
  return n;
}

json parameters_to_json(std::vector<std::pair<std::string, Tensor>> named) {
  json arr = json::array();
  for (auto& [name, tensor] : named) {
    arr.push_back(json{{"name", name},
                       {"rows", tensor.rows()},
                       {"cols", tensor.cols()},
                       {"data", std::vector<double>(tensor.data().begin(),
                                                    tensor.data().end())}});
  }
  return arr;
}

void parameters_from_json(const nlohmann::json& arr,
                          std::vector<std::pair<std::string, Tensor>> named) {
  if (arr.size() != named.size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& item = arr.at(i);
    auto& [name, tensor] = named[i];
    if (item.at("name").get<std::string>() != name ||
        item.at("rows").get<int>() != tensor.rows() ||
        item.at("cols").get<int>() != tensor.cols()) {
      throw std::runtime_error("checkpoint: parameter layout mismatch at " + name);
    }
    const auto data = item.at("data").get<std::vector<double>>();
    if (int(data.size()) != tensor.size()) {
      throw std::runtime_error("checkpoint: parameter size mismatch at " + name);
    }
    tensor.apply_update(data);
  }
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return nlohmann::json::parse(in);
}

json model_config_to_json(const ModelConfig& c) {
  return json{{"t_x", c.t_x},
              {"t_y", c.t_y},
              {"t_label", c.t_label},
              {"n_features", c.n_features},
              {"d_model", c.d_model},
              {"n_heads", c.n_heads},
              {"n_encoder_layers", c.n_encoder_layers},
              {"n_decoder_layers", c.n_decoder_layers},
              {"d_ff", c.d_ff},
              {"dropout", c.dropout},
              {"attention", c.attention == AttentionKind::kFull ? "full"
                                                                : "probsparse"},
              {"sparsity_factor", c.sparsity_factor},
              {"distilling", c.distilling}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.t_x = j.at("t_x").get<int>();
  c.t_y = j.at("t_y").get<int>();
  c.t_label = j.at("t_label").get<int>();
  c.n_features = j.at("n_features").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_encoder_layers = j.at("n_encoder_layers").get<int>();
  c.n_decoder_layers = j.at("n_decoder_layers").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.dropout = j.at("dropout").get<double>();
  const auto kind = j.at("attention").get<std::string>();
  if (kind == "full") {
    c.attention = AttentionKind::kFull;
  } else if (kind == "probsparse") {
    c.attention = AttentionKind::kProbSparse;
  } else {
    throw std::runtime_error("checkpoint: unknown attention kind " + kind);
  }
  c.sparsity_factor = j.at("sparsity_factor").get<int>();
  c.distilling = j.at("distilling").get<bool>();
  c.validate();
  return c;
}

json lstm_config_to_json(const LstmConfig& c) {
  return json{{"t_x", c.t_x},
              {"t_y", c.t_y},
              {"n_features", c.n_features},
              {"hidden_size", c.hidden_size}};
}

LstmConfig lstm_config_from_json(const nlohmann::json& j) {
  LstmConfig c;
  c.t_x = j.at("t_x").get<int>();
  c.t_y = j.at("t_y").get<int>();
  c.n_features = j.at("n_features").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.validate();
  return c;
}

json window_to_json(const WindowSample& w) {
  std::vector<int> target_days;
  target_days.reserve(w.target_dates.size());
  for (Date d : w.target_dates) target_days.push_back(d.days);
  return json{{"contract_id", w.contract_id},
              {"start_date", w.start_date.days},
              {"end_date", w.end_date.days},
              {"target_dates", target_days},
              {"encoder_raw", w.encoder_raw},
              {"decoder_known_raw", w.decoder_known_raw},
              {"target_raw", w.target_raw},
              {"anchor_price", w.anchor_price},
              {"t_x", w.t_x},
              {"t_y", w.t_y},
              {"t_label", w.t_label}};
}

WindowSample window_from_json(const nlohmann::json& j) {
  WindowSample w;
  w.contract_id = j.at("contract_id").get<std::string>();
  w.start_date.days = j.at("start_date").get<int>();
  w.end_date.days = j.at("end_date").get<int>();
  for (int days : j.at("target_dates").get<std::vector<int>>()) {
    w.target_dates.push_back(Date{days});
  }
  w.encoder_raw = j.at("encoder_raw").get<std::vector<double>>();
  w.decoder_known_raw = j.at("decoder_known_raw").get<std::vector<double>>();
  w.target_raw = j.at("target_raw").get<std::vector<double>>();
  w.anchor_price = j.at("anchor_price").get<double>();
  w.t_x = j.at("t_x").get<int>();
  w.t_y = j.at("t_y").get<int>();
  w.t_label = j.at("t_label").get<int>();
  return w;
}

void save_checkpoint_impl(const std::string& path, const std::string& kind,
                          json config,
                          std::vector<std::pair<std::string, Tensor>> named,
                          const NormalizationParams& normalizer) {
  json doc;
  doc["version"] = 1;
  doc["kind"] = kind;
  doc["config"] = std::move(config);
  doc["normalizer"] = normalizer_to_json(normalizer);
  doc["parameters"] = parameters_to_json(std::move(named));
  write_json(path, doc);
}

}  // namespace

void save_checkpoint(const std::string& path, InformerModel& model,
                     const NormalizationParams& normalizer) {
  save_checkpoint_impl(path, "informer", model_config_to_json(model.config()),
                       model.named_parameters(), normalizer);
}

void save_checkpoint(const std::string& path, LstmModel& model,
                     const NormalizationParams& normalizer) {
  save_checkpoint_impl(path, "lstm", lstm_config_to_json(model.config()),
                       model.named_parameters(), normalizer);
}

LoadedModel load_checkpoint(const std::string& path) {
  const nlohmann::json doc = read_json(path);
  if (doc.at("version").get<int>() != 1) {
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  }
  LoadedModel loaded;
  loaded.kind = doc.at("kind").get<std::string>();
  loaded.normalizer = normalizer_from_json(doc.at("normalizer"));
  if (loaded.kind == "informer") {
    auto model = std::make_unique<InformerModel>(
        model_config_from_json(doc.at("config")), Rng(0));
    parameters_from_json(doc.at("parameters"), model->named_parameters());
    loaded.model = std::move(model);
  } else if (loaded.kind == "lstm") {
    auto model = std::make_unique<LstmModel>(
        lstm_config_from_json(doc.at("config")), Rng(0));
    parameters_from_json(doc.at("parameters"), model->named_parameters());
    loaded.model = std::move(model);
  } else {
    throw std::runtime_error("checkpoint: unknown model kind " + loaded.kind);
  }
  return loaded;
}

void save_split(const std::string& path, const DatasetSplit& split) {
  json doc;
  doc["version"] = 1;
  doc["normalizer"] = normalizer_to_json(split.normalizer);
  for (const char* part : {"train", "validation", "test"}) {
    const auto& samples = part == std::string("train")        ? split.train
                          : part == std::string("validation") ? split.validation
                                                              : split.test;
    json arr = json::array();
    for (const auto& w : samples) arr.push_back(window_to_json(w));
    doc[part] = std::move(arr);
  }
  write_json(path, doc);
}

DatasetSplit load_split(const std::string& path) {
  const nlohmann::json doc = read_json(path);
  if (doc.at("version").get<int>() != 1) {
    throw std::runtime_error("split file: unsupported version in " + path);
  }
  DatasetSplit split;
  split.normalizer = normalizer_from_json(doc.at("normalizer"));
  for (const auto& w : doc.at("train")) split.train.push_back(window_from_json(w));
  for (const auto& w : doc.at("validation")) {
    split.validation.push_back(window_from_json(w));
  }
  for (const auto& w : doc.at("test")) split.test.push_back(window_from_json(w));
  normalize_samples(split.train, split.normalizer);
  normalize_samples(split.validation, split.normalizer);
  normalize_samples(split.test, split.normalizer);
  return split;
}

}  // namespace optlab
