#include <fstream>
#include <iterator>

#include "ddosnet/pipeline.hpp"
#include "ddosnet/synth.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace ddosnet;
using namespace ddosnet::pipeline;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path dataset(const fs::path& dir) {
  synth::SyntheticSpec s;
  s.rows = 300;
  s.numeric_features = 6;
  s.proportions = {0.4, 0.25, 0.2, 0.1, 0.05};
  synth::write_flow_csv(s, dir / "flows.csv");
  return dir / "flows.csv";
}

PipelineConfig quick(const fs::path& input, const fs::path& out) {
  auto cfg = make_config("desk");
  cfg.input = input.string();
  cfg.output = out.string();
  cfg.extractor.blocks = 2;
  cfg.extractor_epochs = 3;
  cfg.gan.epochs = 3;
  cfg.skip_tune = true;
  cfg.overrides.epochs = 8;
  cfg.overrides.learning_rate = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("stage names and exit codes") {
  CHECK(stage_exit_code(Stage::ingest) == 10);
  CHECK(stage_exit_code(Stage::report) == 15);
  CHECK(stage_from_string("tune") == Stage::tune);
  CHECK_THROWS_AS(stage_from_string("deploy"), ConfigError);
}

TEST_CASE("sha256 of known inputs") {
  auto dir = testing::scratch_dir("sha");
  testing::write_file(dir / "empty", "");
  testing::write_file(dir / "abc", "abc");
  CHECK(sha256_file(dir / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_file(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("end-to-end run, determinism and stage isolation") {
  auto dir = testing::scratch_dir("pipeline_e2e");
  auto input = dataset(dir);
  auto cfg = quick(input, dir / "a");
  RunOptions opts;
  opts.emit_clean = true;
  opts.emit_synthetic = true;
  auto manifest = run_pipeline(cfg, opts);

  for (const char* f : {"ingest/train.csv", "ingest/test.csv", "ingest/meta.json", "ingest/clean.csv",
                        "augment/train.csv", "augment/census.json", "augment/synthetic.csv", "tune/extractor.ckpt",
                        "tune/extractor_trace.csv", "tune/aso_trace.csv", "tune/hyperparameters.json",
                        "train/classifier.ckpt", "train/epoch_trace.csv", "evaluate/metrics.json",
                        "evaluate/per_class.csv", "evaluate/confusion.csv", "report/report.txt", "manifest.json"})
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);
  CHECK(verify_manifest(dir / "a").empty());
  CHECK_FALSE(fs::exists(dir / "a" / "train.tmp"));

  // Median targets are met exactly and recorded in the manifest.
  const auto& census = manifest.at("census");
  const auto& before = census.at("before_augmentation");
  const auto& after = census.at("after_augmentation");
  std::vector<std::size_t> counts;
  for (const auto& [k, v] : before.items()) counts.push_back(v.get<std::size_t>());
  std::sort(counts.begin(), counts.end());
  const std::size_t median = counts[counts.size() / 2];
  for (const auto& [k, v] : before.items())
    CHECK(after.at(k).get<std::size_t>() == std::max(v.get<std::size_t>(), median));

  const auto& hp = manifest.at("hyperparameters");
  CHECK(hp.at("source") == "published");
  CHECK(hp.at("momentum") == 0.9);
  CHECK(hp.at("epochs") == 8);
  CHECK(manifest.at("tool_version") == kToolVersion);
  CHECK(manifest.at("config").at("seed") == "1");

  // Same config and seed, fresh directory: identical metrics.
  auto again = cfg;
  again.output = (dir / "b").string();
  run_pipeline(again);
  const std::string metrics = slurp(dir / "a/evaluate/metrics.json");
  CHECK(slurp(dir / "b/evaluate/metrics.json") == metrics);
  CHECK(slurp(dir / "b/train/classifier.ckpt") == slurp(dir / "a/train/classifier.ckpt"));

  // Replaying the manifest's config reproduces the run.
  auto replay = config_from_manifest(manifest);
  CHECK(to_config_text(replay) == to_config_text(cfg));

  // Deleting downstream artifacts and re-running only those stages.
  fs::remove_all(dir / "b/train");
  fs::remove_all(dir / "b/evaluate");
  fs::remove_all(dir / "b/report");
  run_stage(Stage::train, again);
  run_stage(Stage::evaluate, again);
  CHECK(slurp(dir / "b/evaluate/metrics.json") == metrics);

  // Evaluate and report reuse artifacts without retraining.
  const auto ckpt_time = fs::last_write_time(dir / "b/train/classifier.ckpt");
  run_stage(Stage::evaluate, again);
  CHECK(fs::last_write_time(dir / "b/train/classifier.ckpt") == ckpt_time);
  CHECK(slurp(dir / "b/evaluate/metrics.json") == metrics);
  testing::write_file(dir / "b/train/classifier.ckpt", "garbage");
  run_stage(Stage::report, again);
  CHECK(slurp(dir / "b/report/report.txt") == slurp(dir / "a/report/report.txt"));

  // Re-running a stage clears everything after it.
  run_stage(Stage::augment, again, opts);
  CHECK_FALSE(fs::exists(dir / "b/tune"));
  CHECK_FALSE(fs::exists(dir / "b/report"));
  CHECK(slurp(dir / "b/augment/synthetic.csv") == slurp(dir / "a/augment/synthetic.csv"));
  run_stage(Stage::augment, again, opts);
  CHECK(slurp(dir / "b/augment/synthetic.csv") == slurp(dir / "a/augment/synthetic.csv"));

  // Tampering is visible to verification.
  testing::write_file(dir / "a/evaluate/per_class.csv", "x");
  auto bad = verify_manifest(dir / "a");
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == "evaluate/per_class.csv");
}

TEST_CASE("stage errors") {
  auto dir = testing::scratch_dir("pipeline_errors");
  auto input = dataset(dir);
  auto cfg = quick(input, dir / "out");

  try {
    run_stage(Stage::train, cfg);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.exit_code() == 13);
    CHECK(std::string(e.what()).find("run stage tune first") != std::string::npos);
  }

  auto missing = cfg;
  missing.input = (dir / "nope.csv").string();
  try {
    run_stage(Stage::ingest, missing);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == Stage::ingest);
    CHECK(e.exit_code() == 10);
  }
  CHECK_FALSE(fs::exists(dir / "out/ingest"));
  CHECK_FALSE(fs::exists(dir / "out/ingest.tmp"));

  run_stage(Stage::ingest, cfg);
  auto bad_targets = cfg;
  bad_targets.targets = "Martians=10";
  CHECK_THROWS_AS(run_stage(Stage::augment, bad_targets), ConfigError);
  CHECK_FALSE(fs::exists(dir / "out/augment.tmp"));
  bad_targets.targets = "Normal=1";
  try {
    run_stage(Stage::augment, bad_targets);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.exit_code() == 11);
  }

  auto no_input = cfg;
  no_input.input.clear();
  CHECK_THROWS_AS(run_pipeline(no_input), ConfigError);
}

TEST_CASE("explicit targets, tuning and raw classifier input") {
  auto dir = testing::scratch_dir("pipeline_variants");
  auto input = dataset(dir);
  auto cfg = quick(input, dir / "tuned");
  cfg.targets = "Backdoors=40,Worms=30";
  cfg.skip_tune = false;
  cfg.aso.population = 3;
  cfg.aso.iterations = 2;
  cfg.proxy_epochs = 1;
  cfg.proxy_metric = ProxyMetric::cross_entropy;
  auto manifest = run_pipeline(cfg);
  const auto& census = manifest.at("census");
  CHECK(census.at("after_augmentation").at("Backdoors") == 40);
  CHECK(census.at("after_augmentation").at("Worms") == 30);
  CHECK(census.at("after_augmentation").at("Normal") == census.at("before_augmentation").at("Normal"));
  CHECK(manifest.at("hyperparameters").at("source") == "aso");
  CHECK(manifest.at("hyperparameters").at("epochs") == 8);  // override wins
  auto trace = slurp(dir / "tuned/tune/aso_trace.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 3);  // header plus one row per iteration

  auto raw = quick(input, dir / "raw");
  raw.classifier_input = ClassifierInput::raw;
  raw.augment = false;
  auto m2 = run_pipeline(raw);
  CHECK_FALSE(fs::exists(dir / "raw/tune/extractor.ckpt"));
  CHECK(m2.at("census").at("after_augmentation") == m2.at("census").at("before_augmentation"));
  CHECK(verify_manifest(dir / "raw").empty());
}
