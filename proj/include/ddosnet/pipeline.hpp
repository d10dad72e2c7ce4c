#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddosnet/config.hpp"
#include "json.hpp"

namespace ddosnet::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Stage { ingest, augment, tune, train, evaluate, report };

inline constexpr Stage kStages[] = {Stage::ingest, Stage::augment, Stage::tune,
                                    Stage::train,  Stage::evaluate, Stage::report};

const char* stage_name(Stage s);
Stage stage_from_string(const std::string& name);

/// Process exit codes: 2 for configuration errors, 10..15 per stage.
inline constexpr int kConfigExitCode = 2;
int stage_exit_code(Stage s);

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& message);
  Stage stage() const { return stage_; }
  int exit_code() const { return stage_exit_code(stage_); }

 private:
  Stage stage_;
};

struct RunOptions {
  bool emit_clean = false;      // ingest also writes the whole preprocessed dataset
  bool emit_synthetic = false;  // augment also writes the rows with a 0/1 synthetic column
};

/// <output>/<stage>
std::filesystem::path stage_dir(const PipelineConfig& cfg, Stage s);

/// Runs one stage from the artifacts of the previous one. The stage
/// directory is built under a temporary name and renamed on success;
/// directories of later stages are removed first.
void run_stage(Stage s, const PipelineConfig& cfg, const RunOptions& opts = {});

/// Every stage in order, then the manifest. Returns the manifest.
nlohmann::json run_pipeline(const PipelineConfig& cfg, const RunOptions& opts = {});

/// Builds <output>/manifest.json from whatever stage directories exist and
/// writes it atomically.
nlohmann::json write_manifest(const PipelineConfig& cfg);

/// Recomputes every digest listed in <dir>/manifest.json. Returns the paths
/// that are missing or differ.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Config entries stored in a manifest, applied on top of defaults.
PipelineConfig config_from_manifest(const nlohmann::json& manifest);

}  // namespace ddosnet::pipeline
