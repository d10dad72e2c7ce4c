#include "ddosnet/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <type_traits>
#include <functional>
#include <sstream>

namespace ddosnet::pipeline {

Hyperparameters HyperparameterOverrides::apply(Hyperparameters h) const {
  if (momentum) h.momentum = *momentum;
  if (learning_rate) h.learning_rate = *learning_rate;
  if (weight_decay) h.weight_decay = *weight_decay;
  if (batch_size) h.batch_size = *batch_size;
  if (epochs) h.epochs = *epochs;
  return h;
}

void PipelineConfig::validate() const {
  try {
    if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train_fraction must be in (0, 1)");
    if (!(validation_fraction > 0 && validation_fraction < 1))
      throw ConfigError("aso.validation_fraction must be in (0, 1)");
    if (label.empty()) throw ConfigError("label must not be empty");
    if (proxy_epochs < 1) throw ConfigError("aso.proxy_epochs must be >= 1");
    if (extractor_batch_size < 1) throw ConfigError("extractor.batch_size must be >= 1");
    if (!(extractor_learning_rate > 0)) throw ConfigError("extractor.learning_rate must be positive");
    if (!(extractor_momentum >= 0 && extractor_momentum < 1)) throw ConfigError("extractor.momentum must be in [0, 1)");
    gan.validate();
    extractor.validate();
    aso.validate();
    classifier.validate();
    overrides.apply(kPublishedHyperparameters).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(static_cast<std::size_t>(to_uint(key, item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

template <std::size_t N>
std::array<std::size_t, N> to_array(const std::string& key, const std::string& v) {
  auto list = to_sizes(key, v);
  if (list.size() != N) throw ConfigError(key + ": expected " + std::to_string(N) + " values");
  std::array<std::size_t, N> out{};
  std::copy(list.begin(), list.end(), out.begin());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename C>
std::string join(const C& c) {
  std::string out;
  for (const auto& v : c) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::string>)
      out += v;
    else
      out += std::to_string(v);
  }
  return out;
}

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define DDOS_DOUBLE(NAME, FIELD)                                                                 \
  Key {                                                                                          \
    NAME, [](PipelineConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); },         \
        [](const PipelineConfig& c) { return fmt(c.FIELD); }                                      \
  }
#define DDOS_SIZE(NAME, FIELD)                                                                              \
  Key {                                                                                                     \
    NAME, [](PipelineConfig& c, const std::string& v) { c.FIELD = static_cast<std::size_t>(to_uint(NAME, v)); }, \
        [](const PipelineConfig& c) { return std::to_string(c.FIELD); }                                      \
  }
#define DDOS_OPTIONAL(NAME, FIELD, PARSE, FORMAT)                                              \
  Key {                                                                                        \
    NAME,                                                                                      \
        [](PipelineConfig& c, const std::string& v) {                                          \
          if (v == "auto")                                                                     \
            c.overrides.FIELD.reset();                                                         \
          else                                                                                 \
            c.overrides.FIELD = PARSE;                                                         \
        },                                                                                     \
        [](const PipelineConfig& c) { return c.overrides.FIELD ? FORMAT : std::string("auto"); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"preset", [](PipelineConfig& c, const std::string& v) { apply_preset(c, v); },
       [](const PipelineConfig& c) { return c.preset; }},
      {"input", [](PipelineConfig& c, const std::string& v) { c.input = v; },
       [](const PipelineConfig& c) { return c.input; }},
      {"label", [](PipelineConfig& c, const std::string& v) { c.label = v; },
       [](const PipelineConfig& c) { return c.label; }},
      {"socket_columns",
       [](PipelineConfig& c, const std::string& v) { c.socket_columns = v == "default" ? std::vector<std::string>{} : split_list(v); },
       [](const PipelineConfig& c) { return c.socket_columns.empty() ? std::string("default") : join(c.socket_columns); }},
      DDOS_DOUBLE("train_fraction", train_fraction),
      DDOS_SIZE("max_rows", max_rows),
      {"seed", [](PipelineConfig& c, const std::string& v) { c.seed = to_uint("seed", v); },
       [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      {"output", [](PipelineConfig& c, const std::string& v) { c.output = v; },
       [](const PipelineConfig& c) { return c.output; }},
      {"classifier_input",
       [](PipelineConfig& c, const std::string& v) {
         if (v == "features")
           c.classifier_input = ClassifierInput::features;
         else if (v == "raw")
           c.classifier_input = ClassifierInput::raw;
         else
           throw ConfigError("classifier_input: expected features or raw, got '" + v + "'");
       },
       [](const PipelineConfig& c) {
         return std::string(c.classifier_input == ClassifierInput::features ? "features" : "raw");
       }},

      {"augment.enabled", [](PipelineConfig& c, const std::string& v) { c.augment = to_bool("augment.enabled", v); },
       [](const PipelineConfig& c) { return std::string(c.augment ? "true" : "false"); }},
      {"augment.targets", [](PipelineConfig& c, const std::string& v) { c.targets = v; },
       [](const PipelineConfig& c) { return c.targets; }},

      DDOS_SIZE("gan.noise_dim", gan.noise_dim),
      {"gan.generator_widths",
       [](PipelineConfig& c, const std::string& v) { c.gan.generator_widths = to_sizes("gan.generator_widths", v); },
       [](const PipelineConfig& c) { return join(c.gan.generator_widths); }},
      {"gan.discriminator_widths",
       [](PipelineConfig& c, const std::string& v) {
         c.gan.discriminator_widths = to_sizes("gan.discriminator_widths", v);
       },
       [](const PipelineConfig& c) { return join(c.gan.discriminator_widths); }},
      DDOS_DOUBLE("gan.leaky_slope", gan.leaky_slope),
      DDOS_DOUBLE("gan.learning_rate", gan.learning_rate),
      DDOS_DOUBLE("gan.momentum", gan.momentum),
      DDOS_SIZE("gan.batch_size", gan.batch_size),
      DDOS_SIZE("gan.epochs", gan.epochs),

      DDOS_SIZE("extractor.blocks", extractor.blocks),
      DDOS_SIZE("extractor.base_width", extractor.base_width),
      DDOS_SIZE("extractor.widen_every", extractor.widen_every),
      DDOS_SIZE("extractor.feature_dim", extractor.feature_dim),
      DDOS_DOUBLE("extractor.dropout", extractor.dropout),
      DDOS_SIZE("extractor.epochs", extractor_epochs),
      DDOS_DOUBLE("extractor.learning_rate", extractor_learning_rate),
      DDOS_DOUBLE("extractor.momentum", extractor_momentum),
      DDOS_SIZE("extractor.batch_size", extractor_batch_size),

      DDOS_SIZE("aso.population", aso.population),
      DDOS_SIZE("aso.iterations", aso.iterations),
      DDOS_DOUBLE("aso.alpha", aso.depth_weight),
      DDOS_DOUBLE("aso.beta", aso.multiplier_weight),
      DDOS_DOUBLE("aso.g0", aso.g0),
      DDOS_DOUBLE("aso.u", aso.u),
      {"aso.force_law",
       [](PipelineConfig& c, const std::string& v) {
         if (v == "lennard_jones")
           c.aso.force_law = aso::ForceLaw::lennard_jones;
         else if (v == "literal")
           c.aso.force_law = aso::ForceLaw::literal;
         else
           throw ConfigError("aso.force_law: expected lennard_jones or literal, got '" + v + "'");
       },
       [](const PipelineConfig& c) {
         return std::string(c.aso.force_law == aso::ForceLaw::lennard_jones ? "lennard_jones" : "literal");
       }},
      DDOS_SIZE("aso.proxy_epochs", proxy_epochs),
      DDOS_DOUBLE("aso.validation_fraction", validation_fraction),
      {"aso.proxy_metric",
       [](PipelineConfig& c, const std::string& v) {
         if (v == "error")
           c.proxy_metric = ProxyMetric::error;
         else if (v == "cross_entropy")
           c.proxy_metric = ProxyMetric::cross_entropy;
         else
           throw ConfigError("aso.proxy_metric: expected error or cross_entropy, got '" + v + "'");
       },
       [](const PipelineConfig& c) {
         return std::string(c.proxy_metric == ProxyMetric::error ? "error" : "cross_entropy");
       }},
      {"tune.skip", [](PipelineConfig& c, const std::string& v) { c.skip_tune = to_bool("tune.skip", v); },
       [](const PipelineConfig& c) { return std::string(c.skip_tune ? "true" : "false"); }},

      DDOS_OPTIONAL("classifier.momentum", momentum, to_double("classifier.momentum", v), fmt(*c.overrides.momentum)),
      DDOS_OPTIONAL("classifier.learning_rate", learning_rate, to_double("classifier.learning_rate", v),
                    fmt(*c.overrides.learning_rate)),
      DDOS_OPTIONAL("classifier.weight_decay", weight_decay, to_double("classifier.weight_decay", v),
                    fmt(*c.overrides.weight_decay)),
      DDOS_OPTIONAL("classifier.batch_size", batch_size,
                    static_cast<std::size_t>(to_uint("classifier.batch_size", v)),
                    std::to_string(*c.overrides.batch_size)),
      DDOS_OPTIONAL("classifier.epochs", epochs, static_cast<std::size_t>(to_uint("classifier.epochs", v)),
                    std::to_string(*c.overrides.epochs)),
      {"classifier.kernels",
       [](PipelineConfig& c, const std::string& v) { c.classifier.kernels = to_array<3>("classifier.kernels", v); },
       [](const PipelineConfig& c) { return join(c.classifier.kernels); }},
      {"classifier.channels",
       [](PipelineConfig& c, const std::string& v) { c.classifier.channels = to_array<3>("classifier.channels", v); },
       [](const PipelineConfig& c) { return join(c.classifier.channels); }},
      {"classifier.dense_widths",
       [](PipelineConfig& c, const std::string& v) {
         c.classifier.dense_widths = to_array<2>("classifier.dense_widths", v);
       },
       [](const PipelineConfig& c) { return join(c.classifier.dense_widths); }},
      DDOS_SIZE("classifier.pool_window", classifier.pool_window),
      DDOS_DOUBLE("classifier.dropout", classifier.dropout),
      DDOS_DOUBLE("classifier.max_grad_norm", classifier.max_grad_norm),
  };
  return table;
}

#undef DDOS_DOUBLE
#undef DDOS_SIZE
#undef DDOS_OPTIONAL

}  // namespace

void apply_preset(PipelineConfig& cfg, const std::string& preset) {
  if (preset == "paper") {
    cfg.extractor.blocks = 16;
    cfg.extractor_epochs = 20;
    cfg.gan.epochs = 100;
    cfg.aso.population = 20;
    cfg.aso.iterations = 100;
    cfg.proxy_epochs = 5;
    cfg.max_rows = 0;
  } else if (preset == "desk") {
    cfg.extractor.blocks = 4;
    cfg.extractor_epochs = 10;
    cfg.gan.epochs = 30;
    cfg.aso.population = 10;
    cfg.aso.iterations = 20;
    cfg.proxy_epochs = 3;
    cfg.max_rows = 5000;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
  }
  cfg.preset = preset;
}

PipelineConfig make_config(const std::string& preset) {
  PipelineConfig cfg;
  apply_preset(cfg, preset);
  return cfg;
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      try {
        k.set(cfg, value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<ConfigEntry> parse_config_text(const std::string& text) {
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(n) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out.push_back({key, trim(line.substr(eq + 1)), n});
  }
  return out;
}

std::string to_config_text(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

}  // namespace ddosnet::pipeline
