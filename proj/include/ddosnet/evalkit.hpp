#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddosnet::evalkit {

/// counts[t][p]: rows of true class t predicted as p.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::uint64_t>> counts;

  std::size_t n_classes() const { return counts.size(); }
  std::uint64_t total() const;
};

/// class_names may be empty, in which case classes are named by index.
ConfusionMatrix confusion_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                           std::size_t n_classes,
                                           std::vector<std::string> class_names = {});

struct BinaryCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// One-vs-rest reduction for class c.
BinaryCounts one_vs_rest(const ConfusionMatrix& m, std::size_t c);

struct ClassMetrics {
  std::string name;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

/// accuracy = (tp+tn)/all, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// f1 = 2pr/(p+r); any 0/0 ratio is 0.
ClassMetrics metrics_from_counts(const BinaryCounts& c);

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro;  // unweighted mean over classes
  double overall_accuracy = 0.0;
  std::uint64_t rows = 0;

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport per_class_metrics(const ConfusionMatrix& m);

enum class ReportFormat { table, json, csv };

ReportFormat report_format_from_string(const std::string& text);

std::string render_report(const MetricsReport& report, ReportFormat format);
MetricsReport parse_report_json(const std::string& text);
std::string render_confusion_csv(const ConfusionMatrix& m);

}  // namespace ddosnet::evalkit
