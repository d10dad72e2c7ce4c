#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddosnet/alexclf.hpp"
#include "ddosnet/aso.hpp"
#include "ddosnet/gan.hpp"
#include "ddosnet/hyperparameters.hpp"
#include "ddosnet/resfeat.hpp"

namespace ddosnet::pipeline {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ClassifierInput { features, raw };

/// Fitness of one proxy training run: misclassification rate on the
/// validation rows, or their mean cross-entropy.
enum class ProxyMetric { error, cross_entropy };

struct HyperparameterOverrides {
  std::optional<double> momentum;
  std::optional<double> learning_rate;
  std::optional<double> weight_decay;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> epochs;

  Hyperparameters apply(Hyperparameters h) const;
};

struct PipelineConfig {
  std::string preset = "paper";
  std::string input;
  std::string label = "attack_cat";
  std::vector<std::string> socket_columns;  // empty means the built-in list
  double train_fraction = 0.7;
  std::size_t max_rows = 0;  // 0 keeps every row
  std::uint64_t seed = 1;
  std::string output = "out";
  ClassifierInput classifier_input = ClassifierInput::features;

  bool augment = true;
  std::string targets = "median";  // "median", "none" or "Class=count,..."
  gan::GanConfig gan;

  resfeat::ExtractorConfig extractor;
  std::size_t extractor_epochs = 20;
  double extractor_learning_rate = 0.05;
  double extractor_momentum = 0.9;
  std::size_t extractor_batch_size = 32;

  aso::AsoConfig aso;
  std::size_t proxy_epochs = 5;
  double validation_fraction = 0.2;
  ProxyMetric proxy_metric = ProxyMetric::error;
  bool skip_tune = false;

  HyperparameterOverrides overrides;
  alexclf::ClassifierConfig classifier;

  void validate() const;
};

/// Built-in defaults followed by the named preset.
PipelineConfig make_config(const std::string& preset = "paper");
void apply_preset(PipelineConfig& cfg, const std::string& preset);

/// Sets one dotted key. Throws ConfigError for unknown keys or bad values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses `key = value` lines; `[section]` headers prefix later keys with
/// "section."; `#` starts a comment.
std::vector<ConfigEntry> parse_config_text(const std::string& text);

/// Every key with its current value, in a stable order; parses back to an
/// identical config.
std::string to_config_text(const PipelineConfig& cfg);

/// Names of every accepted key.
std::vector<std::string> config_keys();

}  // namespace ddosnet::pipeline
