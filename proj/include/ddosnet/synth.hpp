#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ddosnet::synth {

/// Gaussian class clusters dressed up as flow records: numeric columns with
/// mixed scales, a class-dependent "proto" column, address/port columns and
/// one constant column, so the whole preprocessing path is exercised.
struct SyntheticSpec {
  std::vector<std::string> class_names{"Normal", "DoS", "DDoS", "Worms", "Backdoors"};
  std::vector<double> proportions{0.45, 0.25, 0.15, 0.075, 0.075};
  std::size_t rows = 1000;
  std::size_t numeric_features = 12;
  double separation = 3.0;  // sd of class centroids, in units of the within-class sd
  std::uint64_t seed = 1;
  std::string label_column = "attack_cat";

  void validate() const;
};

/// Exact per-class row counts: rounded shares, remainder to the first class.
std::vector<std::size_t> class_counts(const SyntheticSpec& spec);

/// Writes the CSV and returns the per-class row counts.
std::vector<std::size_t> write_flow_csv(const SyntheticSpec& spec, const std::filesystem::path& path);

}  // namespace ddosnet::synth
