#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ddosnet/log.hpp"
#include "ddosnet/pipeline.hpp"
#include "ddosnet/synth.hpp"

namespace fs = std::filesystem;
using namespace ddosnet;
using namespace ddosnet::pipeline;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  bool skip_tune = false;
  std::string out;
  std::string input;
  std::vector<std::string> settings;
  bool emit_clean = false;
  bool emit_synthetic = false;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value config file, or a manifest.json to replay");
  cmd->add_option("--preset", f.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_flag("--skip-tune", f.skip_tune, "use the published hyperparameters instead of searching");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--input", f.input, "input flow CSV");
  cmd->add_option("--set", f.settings, "override one key: --set key=value (repeatable)");
  cmd->add_flag("--emit-clean", f.emit_clean, "ingest also writes the preprocessed dataset");
  cmd->add_flag("--emit-synthetic", f.emit_synthetic, "augment also writes rows flagged as synthetic");
  cmd->add_flag("-v,--verbose", f.verbose, "log progress to stderr");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineConfig resolve(const CommonFlags& f) {
  std::vector<ConfigEntry> entries;
  std::string preset = "paper";
  bool from_manifest = false;
  nlohmann::json manifest;
  if (!f.config_path.empty()) {
    const std::string text = slurp(f.config_path);
    if (fs::path(f.config_path).extension() == ".json") {
      manifest = nlohmann::json::parse(text);
      from_manifest = true;
      preset = manifest.at("config").value("preset", preset);
    } else {
      entries = parse_config_text(text);
      for (const auto& e : entries)
        if (e.key == "preset") preset = e.value;
    }
  }
  if (!f.preset.empty()) preset = f.preset;

  PipelineConfig cfg = from_manifest ? config_from_manifest(manifest) : make_config(preset);
  if (from_manifest && preset != cfg.preset) apply_preset(cfg, preset);
  for (const auto& e : entries) {
    if (e.key == "preset") continue;
    try {
      apply_setting(cfg, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(f.config_path + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  for (const auto& s : f.settings) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.skip_tune) cfg.skip_tune = true;
  if (!f.out.empty()) cfg.output = f.out;
  if (!f.input.empty()) cfg.input = f.input;
  cfg.validate();
  return cfg;
}

void print_report(const PipelineConfig& cfg) {
  std::ifstream in(stage_dir(cfg, Stage::report) / "report.txt");
  std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DoS/DDoS flow classifier: preprocess, augment, extract, tune, train, evaluate"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* run = app.add_subcommand("run", "every stage in order");
  add_common(run, flags);
  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (Stage s : kStages) {
    CLI::App* cmd = app.add_subcommand(stage_name(s), std::string("run the ") + stage_name(s) + " stage only");
    add_common(cmd, flags);
    stage_cmds.emplace_back(cmd, s);
  }

  CommonFlags show_flags;
  CLI::App* show = app.add_subcommand("config", "print the effective configuration");
  add_common(show, show_flags);

  std::string verify_dir;
  CLI::App* verify = app.add_subcommand("verify", "recompute the digests in a run's manifest");
  verify->add_option("dir", verify_dir, "output directory of a run")->required();

  synth::SyntheticSpec spec;
  std::string synth_path;
  std::vector<std::string> proportions;
  CLI::App* syn = app.add_subcommand("synth", "write a synthetic labelled flow CSV");
  syn->add_option("path", synth_path, "output CSV")->required();
  syn->add_option("--rows", spec.rows, "row count");
  syn->add_option("--features", spec.numeric_features, "numeric feature columns");
  syn->add_option("--separation", spec.separation, "spread of class centroids");
  syn->add_option("--seed", spec.seed, "seed");
  syn->add_option("--proportions", spec.proportions, "class shares, one per class")->delimiter(',');
  syn->add_option("--classes", spec.class_names, "class names")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExitCode;
  }

  try {
    if (syn->parsed()) {
      auto counts = synth::write_flow_csv(spec, synth_path);
      for (std::size_t c = 0; c < counts.size(); ++c) std::cout << spec.class_names[c] << "," << counts[c] << "\n";
      return 0;
    }
    if (verify->parsed()) {
      auto bad = verify_manifest(verify_dir);
      for (const auto& b : bad) std::cout << "MISMATCH " << b << "\n";
      std::cout << (bad.empty() ? "manifest ok\n" : "manifest has mismatches\n");
      return bad.empty() ? 0 : 1;
    }
    if (show->parsed()) {
      std::cout << to_config_text(resolve(show_flags));
      return 0;
    }

    if (flags.verbose) {
      set_log_threshold(LogLevel::info);
      set_log_sink([](LogLevel, std::string_view m) { std::cerr << m << "\n"; });
    }
    const PipelineConfig cfg = resolve(flags);
    RunOptions opts{flags.emit_clean, flags.emit_synthetic};
    if (run->parsed()) {
      run_pipeline(cfg, opts);
      print_report(cfg);
      return 0;
    }
    for (auto [cmd, s] : stage_cmds) {
      if (!cmd->parsed()) continue;
      run_stage(s, cfg, opts);
      write_manifest(cfg);
      if (s == Stage::report) print_report(cfg);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExitCode;
  } catch (const StageError& e) {
    std::cerr << "stage " << stage_name(e.stage()) << " failed: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
