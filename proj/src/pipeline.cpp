#include "ddosnet/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ddosnet/checkpoint.hpp"
#include "ddosnet/evalkit.hpp"
#include "ddosnet/flowdata.hpp"
#include "ddosnet/log.hpp"
#include "ddosnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ddosnet::pipeline {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::augment: return "augment";
    case Stage::tune: return "tune";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
    case Stage::report: return "report";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  for (Stage s : kStages)
    if (name == stage_name(s)) return s;
  throw ConfigError("unknown stage '" + name + "'");
}

int stage_exit_code(Stage s) { return 10 + static_cast<int>(s); }

StageError::StageError(Stage stage, const std::string& message)
    : std::runtime_error(std::string(stage_name(stage)) + ": " + message), stage_(stage) {}

fs::path stage_dir(const PipelineConfig& cfg, Stage s) { return fs::path(cfg.output) / stage_name(s); }

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

json read_json(const fs::path& p) { return json::parse(read_text(p)); }
void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

Stage upstream_of(Stage s) { return static_cast<Stage>(static_cast<int>(s) - 1); }

void require_stage(const PipelineConfig& cfg, Stage s, Stage needed) {
  if (!fs::exists(stage_dir(cfg, needed) / "stage.json"))
    throw StageError(s, std::string("missing artifacts in ") + stage_dir(cfg, needed).string() + "; run stage " +
                            stage_name(needed) + " first");
}

json census_json(const flowdata::Dataset& d) {
  json j = json::object();
  auto counts = d.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) j[d.class_names[c]] = counts[c];
  return j;
}

json hyperparameters_json(const Hyperparameters& h) {
  return {{"momentum", h.momentum},
          {"learning_rate", h.learning_rate},
          {"weight_decay", h.weight_decay},
          {"batch_size", h.batch_size},
          {"epochs", h.epochs}};
}

Hyperparameters hyperparameters_from_json(const json& j) {
  Hyperparameters h;
  h.momentum = j.at("momentum").get<double>();
  h.learning_rate = j.at("learning_rate").get<double>();
  h.weight_decay = j.at("weight_decay").get<double>();
  h.batch_size = j.at("batch_size").get<std::size_t>();
  h.epochs = j.at("epochs").get<std::size_t>();
  return h;
}

std::vector<std::string> class_names_of(const PipelineConfig& cfg) {
  return read_json(stage_dir(cfg, Stage::ingest) / "meta.json").at("class_names").get<std::vector<std::string>>();
}

flowdata::Dataset load_cached(const PipelineConfig& cfg, const fs::path& p) {
  flowdata::LoadOptions lo;
  lo.class_names = class_names_of(cfg);
  lo.max_rejected_fraction = 0.0;
  return flowdata::load_flow_csv(p, cfg.label, lo);
}

resfeat::FeatureExtractor load_extractor(const PipelineConfig& cfg) {
  auto ck = checkpoint::load(stage_dir(cfg, Stage::tune) / "extractor.ckpt");
  auto f = resfeat::build_feature_extractor(ck.metadata.at("input_features").get<std::size_t>(), cfg.extractor, 0);
  checkpoint::restore(f.state(), ck);
  f.frozen = true;
  return f;
}

// Input matrix of the classifier: extractor features, or the normalized
// rows themselves.
Matrix classifier_input(const PipelineConfig& cfg, const resfeat::FeatureExtractor* f, const flowdata::Dataset& d) {
  if (cfg.classifier_input == ClassifierInput::raw) return d.features;
  return resfeat::extract_features(*f, d);
}

double error_rate(const alexclf::Prediction& p, std::span<const int> truth) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += p.labels[i] != truth[i];
  return truth.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(truth.size());
}

double cross_entropy(const alexclf::Prediction& p, std::span<const int> truth) {
  double sum = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    sum -= std::log(std::max(p.probabilities(i, static_cast<std::size_t>(truth[i])), 1e-12));
  return truth.empty() ? 0.0 : sum / static_cast<double>(truth.size());
}

std::map<int, std::size_t> parse_targets(const PipelineConfig& cfg, const flowdata::Dataset& d) {
  if (!cfg.augment || cfg.targets == "none") return {};
  if (cfg.targets == "median") return gan::median_targets(d);
  std::map<int, std::size_t> out;
  std::istringstream in(cfg.targets);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("augment.targets: expected Class=count, got '" + item + "'");
    std::string name = item.substr(0, eq);
    auto it = std::find(d.class_names.begin(), d.class_names.end(), name);
    if (it == d.class_names.end()) throw ConfigError("augment.targets: unknown class '" + name + "'");
    std::size_t count = 0;
    try {
      count = std::stoull(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("augment.targets: bad count in '" + item + "'");
    }
    out[static_cast<int>(it - d.class_names.begin())] = count;
  }
  return out;
}

void ingest(const PipelineConfig& cfg, const RunOptions& opts, const fs::path& dir) {
  if (cfg.input.empty()) throw ConfigError("input is not set");
  flowdata::LoadStats stats;
  auto raw = flowdata::load_flow_csv(cfg.input, cfg.label, {}, &stats);
  std::vector<std::string> sockets = cfg.socket_columns;
  if (sockets.empty()) {
    auto norm = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      return s;
    };
    for (const auto& name : flowdata::default_socket_columns())
      for (const auto& c : raw.schema)
        if (norm(c.name) == norm(name)) {
          sockets.push_back(name);
          break;
        }
  }
  auto data = flowdata::drop_socket_and_constant_features(raw, sockets);
  if (cfg.max_rows > 0) data = flowdata::stratified_subsample(data, cfg.max_rows, derive_seed(cfg.seed, "subsample"));
  auto [train, test] = flowdata::stratified_split(data, cfg.train_fraction, derive_seed(cfg.seed, "split"));
  auto encoder = flowdata::fit_one_hot(train);
  train = flowdata::one_hot_encode(train, encoder);
  test = flowdata::one_hot_encode(test, encoder);
  auto norm = flowdata::min_max_fit(train);
  train = flowdata::min_max_apply(train, norm);
  test = flowdata::min_max_apply(test, norm);

  flowdata::write_dataset_csv(train, dir / "train.csv");
  flowdata::write_dataset_csv(test, dir / "test.csv");
  if (opts.emit_clean) {
    std::vector<std::string> split(train.rows(), "train");
    split.resize(train.rows() + test.rows(), "test");
    flowdata::write_dataset_csv(flowdata::concat_rows(train, test), dir / "clean.csv", {{"split", split}});
  }

  json dropped = json::array();
  for (const auto& c : data.schema)
    if (c.kind == flowdata::ColumnKind::socket || c.kind == flowdata::ColumnKind::constant)
      dropped.push_back({{"name", c.name}, {"kind", flowdata::to_string(c.kind)}});
  json encoder_j = json::array();
  for (const auto& c : encoder.columns) encoder_j.push_back({{"name", c.name}, {"categories", c.categories}});
  json meta = {{"class_names", train.class_names},
               {"label", cfg.label},
               {"source_rows", stats.data_rows},
               {"rejected_rows", stats.rejected_rows},
               {"imputed_values", stats.imputed_values},
               {"dropped_columns", dropped},
               {"one_hot", encoder_j},
               {"normalization", {{"columns", norm.columns}, {"min", norm.min}, {"max", norm.max}}},
               {"features", train.feature_names()},
               {"census", {{"train", census_json(train)}, {"test", census_json(test)}}}};
  write_json(dir / "meta.json", meta);
}

void augment(const PipelineConfig& cfg, const RunOptions& opts, const fs::path& dir) {
  auto train = load_cached(cfg, stage_dir(cfg, Stage::ingest) / "train.csv");
  auto targets = parse_targets(cfg, train);
  gan::GanConfig gcfg = cfg.gan;
  gcfg.seed = derive_seed(cfg.seed, "gan");
  auto result = gan::oversample_minorities(train, targets, gcfg);

  flowdata::write_dataset_csv(result.data, dir / "train.csv");
  if (opts.emit_synthetic) {
    std::vector<std::string> flag;
    for (bool s : result.synthetic) flag.push_back(s ? "1" : "0");
    flowdata::write_dataset_csv(result.data, dir / "synthetic.csv", {{"synthetic", flag}});
  }
  json classes = json::array();
  for (const auto& c : result.classes) {
    json history = json::array();
    for (const auto& e : c.history) history.push_back({{"generator", e.generator}, {"discriminator", e.discriminator}});
    classes.push_back({{"class", train.class_names.at(static_cast<std::size_t>(c.label))},
                       {"original", c.original},
                       {"generated", c.generated},
                       {"method", c.method == gan::AugmentMethod::gan ? "gan" : "jitter"},
                       {"loss_history", history}});
  }
  json targets_j = json::object();
  for (auto [label, count] : targets) targets_j[train.class_names.at(static_cast<std::size_t>(label))] = count;
  write_json(dir / "census.json", {{"before", census_json(train)},
                                   {"after", census_json(result.data)},
                                   {"targets", targets_j},
                                   {"classes", classes}});
}

void tune(const PipelineConfig& cfg, const fs::path& dir) {
  auto train = load_cached(cfg, stage_dir(cfg, Stage::augment) / "train.csv");
  const std::size_t n_classes = train.class_names.size();

  std::optional<resfeat::FeatureExtractor> extractor;
  if (cfg.classifier_input == ClassifierInput::features) {
    auto f = resfeat::build_feature_extractor(train.feature_count(), cfg.extractor, derive_seed(cfg.seed, "extractor"));
    SoftmaxTrainOptions o;
    o.epochs = cfg.extractor_epochs;
    o.batch_size = cfg.extractor_batch_size;
    o.learning_rate = cfg.extractor_learning_rate;
    o.momentum = cfg.extractor_momentum;
    o.seed = derive_seed(cfg.seed, "extractor-train");
    auto trained = resfeat::train_feature_extractor(f, train, o);
    write_text(dir / "extractor_trace.csv", epoch_trace_csv(trained.trace));
    checkpoint::save(dir / "extractor.ckpt",
                     {{"kind", "resfeat"},
                      {"input_features", train.feature_count()},
                      {"feature_dim", f.feature_dim},
                      {"blocks", cfg.extractor.blocks}},
                     f.state());
    // Later stages see the float32 weights, so tuning uses them too.
    auto ck = checkpoint::load(dir / "extractor.ckpt");
    checkpoint::restore(f.state(), ck);
    extractor = std::move(f);
  }

  Hyperparameters chosen = kPublishedHyperparameters;
  json search = nullptr;
  if (!cfg.skip_tune) {
    auto [inner, val] = flowdata::stratified_split(train, 1.0 - cfg.validation_fraction, derive_seed(cfg.seed, "aso-split"));
    const Matrix x_inner = classifier_input(cfg, extractor ? &*extractor : nullptr, inner);
    const Matrix x_val = classifier_input(cfg, extractor ? &*extractor : nullptr, val);
    const std::uint64_t proxy_seed = derive_seed(cfg.seed, "classifier-proxy");
    auto proxy = [&](const Hyperparameters& h) {
      Hyperparameters p = h;
      p.epochs = cfg.proxy_epochs;
      auto c = alexclf::build_classifier(x_inner.cols, n_classes, proxy_seed, cfg.classifier);
      alexclf::train_classifier(c, x_inner, inner.labels, p, proxy_seed);
      auto pred = alexclf::predict(c, x_val);
      return cfg.proxy_metric == ProxyMetric::error ? error_rate(pred, val.labels) : cross_entropy(pred, val.labels);
    };
    aso::AsoConfig acfg = cfg.aso;
    acfg.seed = derive_seed(cfg.seed, "aso");
    auto result = aso::tune_hyperparameters(proxy, acfg);
    chosen = result.best;
    write_text(dir / "aso_trace.csv", aso::trace_csv(result.search.trace));
    search = {{"validation_error", result.best_error},
              {"evaluations", result.search.evaluations},
              {"population", acfg.population},
              {"iterations", acfg.iterations}};
  } else {
    write_text(dir / "aso_trace.csv", aso::trace_csv({}));
  }

  Hyperparameters final_h = cfg.overrides.apply(chosen);
  final_h.validate();
  write_json(dir / "hyperparameters.json", {{"hyperparameters", hyperparameters_json(final_h)},
                                            {"selected", hyperparameters_json(chosen)},
                                            {"source", cfg.skip_tune ? "published" : "aso"},
                                            {"search", search}});
}

alexclf::AlexNetClassifier load_classifier(const PipelineConfig& cfg) {
  auto ck = checkpoint::load(stage_dir(cfg, Stage::train) / "classifier.ckpt");
  auto c = alexclf::build_classifier(ck.metadata.at("feature_dim").get<std::size_t>(),
                                     ck.metadata.at("n_classes").get<std::size_t>(), 0, cfg.classifier);
  checkpoint::restore(c.state(), ck);
  c.trained = true;
  return c;
}

void train_stage(const PipelineConfig& cfg, const fs::path& dir) {
  auto train = load_cached(cfg, stage_dir(cfg, Stage::augment) / "train.csv");
  auto h = hyperparameters_from_json(read_json(stage_dir(cfg, Stage::tune) / "hyperparameters.json").at("hyperparameters"));
  std::optional<resfeat::FeatureExtractor> extractor;
  if (cfg.classifier_input == ClassifierInput::features) extractor = load_extractor(cfg);
  const Matrix x = classifier_input(cfg, extractor ? &*extractor : nullptr, train);
  const std::uint64_t seed = derive_seed(cfg.seed, "classifier");
  auto c = alexclf::build_classifier(x.cols, train.class_names.size(), seed, cfg.classifier);
  auto trace = alexclf::train_classifier(c, x, train.labels, h, seed);
  write_text(dir / "epoch_trace.csv", epoch_trace_csv(trace));
  checkpoint::save(dir / "classifier.ckpt",
                   {{"kind", "alexclf"},
                    {"feature_dim", c.feature_dim},
                    {"n_classes", c.n_classes},
                    {"class_names", train.class_names},
                    {"hyperparameters", hyperparameters_json(h)}},
                   c.state());
}

void evaluate(const PipelineConfig& cfg, const fs::path& dir) {
  auto test = load_cached(cfg, stage_dir(cfg, Stage::ingest) / "test.csv");
  std::optional<resfeat::FeatureExtractor> extractor;
  if (cfg.classifier_input == ClassifierInput::features) {
    if (!fs::exists(stage_dir(cfg, Stage::tune) / "extractor.ckpt"))
      throw StageError(Stage::evaluate, "no extractor checkpoint; run stage tune first");
    extractor = load_extractor(cfg);
  }
  auto c = load_classifier(cfg);
  auto pred = alexclf::predict(c, classifier_input(cfg, extractor ? &*extractor : nullptr, test));
  auto cm = evalkit::confusion_from_predictions(test.labels, pred.labels, test.class_names.size(), test.class_names);
  auto report = evalkit::per_class_metrics(cm);
  write_text(dir / "metrics.json", evalkit::render_report(report, evalkit::ReportFormat::json));
  write_text(dir / "per_class.csv", evalkit::render_report(report, evalkit::ReportFormat::csv));
  write_text(dir / "confusion.csv", evalkit::render_confusion_csv(cm));
}

void report_stage(const PipelineConfig& cfg, const fs::path& dir) {
  auto report = evalkit::parse_report_json(read_text(stage_dir(cfg, Stage::evaluate) / "metrics.json"));
  std::string text = evalkit::render_report(report, evalkit::ReportFormat::table);
  auto hp_path = stage_dir(cfg, Stage::tune) / "hyperparameters.json";
  if (fs::exists(hp_path)) {
    auto hp = read_json(hp_path);
    text += "\nhyperparameters (" + hp.at("source").get<std::string>() + ")\n";
    for (const auto& [k, v] : hp.at("hyperparameters").items()) text += "  " + k + " = " + v.dump() + "\n";
  }
  write_text(dir / "report.txt", text);
}

}  // namespace

void run_stage(Stage s, const PipelineConfig& cfg, const RunOptions& opts) {
  const fs::path final_dir = stage_dir(cfg, s);
  const fs::path tmp = fs::path(cfg.output) / (std::string(stage_name(s)) + ".tmp");
  if (s != Stage::ingest) {
    require_stage(cfg, s, upstream_of(s));
    if (s == Stage::train || s == Stage::evaluate) require_stage(cfg, s, Stage::tune);
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    switch (s) {
      case Stage::ingest: ingest(cfg, opts, tmp); break;
      case Stage::augment: augment(cfg, opts, tmp); break;
      case Stage::tune: tune(cfg, tmp); break;
      case Stage::train: train_stage(cfg, tmp); break;
      case Stage::evaluate: evaluate(cfg, tmp); break;
      case Stage::report: report_stage(cfg, tmp); break;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(tmp / "stage.json", {{"stage", stage_name(s)}, {"seconds", seconds}, {"tool_version", kToolVersion}});
    for (auto later = static_cast<int>(s); later < static_cast<int>(std::size(kStages)); ++later)
      fs::remove_all(stage_dir(cfg, static_cast<Stage>(later)));
    fs::rename(tmp, final_dir);
  } catch (const StageError&) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  } catch (const ConfigError&) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw StageError(s, e.what());
  }
  log_info(std::string("stage ") + stage_name(s) + " done");
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed for " + path.string());
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

json write_manifest(const PipelineConfig& cfg) {
  const fs::path root(cfg.output);
  json config = json::object();
  for (const auto& e : parse_config_text(to_config_text(cfg))) config[e.key] = e.value;

  json stages = json::object();
  json digests = json::object();
  for (Stage s : kStages) {
    const fs::path dir = stage_dir(cfg, s);
    if (!fs::exists(dir / "stage.json")) continue;
    stages[stage_name(s)] = {{"seconds", read_json(dir / "stage.json").at("seconds")}};
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) digests[fs::relative(f, root).generic_string()] = sha256_file(f);
  }

  json census = json::object();
  if (fs::exists(stage_dir(cfg, Stage::ingest) / "meta.json")) {
    auto meta = read_json(stage_dir(cfg, Stage::ingest) / "meta.json");
    census["before_augmentation"] = meta.at("census").at("train");
    census["test"] = meta.at("census").at("test");
  }
  if (fs::exists(stage_dir(cfg, Stage::augment) / "census.json"))
    census["after_augmentation"] = read_json(stage_dir(cfg, Stage::augment) / "census.json").at("after");

  json hyper = nullptr;
  if (fs::exists(stage_dir(cfg, Stage::tune) / "hyperparameters.json")) {
    auto hp = read_json(stage_dir(cfg, Stage::tune) / "hyperparameters.json");
    hyper = hp.at("hyperparameters");
    hyper["source"] = hp.at("source");
  }

  json manifest = {{"tool_version", kToolVersion}, {"config", config}, {"stages", stages},
                   {"census", census},             {"hyperparameters", hyper}, {"digests", digests}};
  fs::create_directories(root);
  const fs::path tmp = root / "manifest.json.tmp";
  write_json(tmp, manifest);
  fs::rename(tmp, root / "manifest.json");
  return manifest;
}

json run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  for (Stage s : kStages) run_stage(s, cfg, opts);
  return write_manifest(cfg);
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  auto manifest = read_json(dir / "manifest.json");
  std::vector<std::string> bad;
  for (const auto& [rel, digest] : manifest.at("digests").items()) {
    const fs::path p = dir / rel;
    if (!fs::exists(p) || sha256_file(p) != digest.get<std::string>()) bad.push_back(rel);
  }
  return bad;
}

PipelineConfig config_from_manifest(const json& manifest) {
  const auto& config = manifest.at("config");
  PipelineConfig cfg = make_config(config.value("preset", std::string("paper")));
  for (const auto& key : config_keys())
    if (key != "preset" && config.contains(key)) apply_setting(cfg, key, config.at(key).get<std::string>());
  return cfg;
}

}  // namespace ddosnet::pipeline
