#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddosnet/matrix.hpp"

namespace ddosnet::flowdata {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { numeric, categorical, label, socket, constant };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> categories;  // categorical only

  bool operator==(const ColumnSchema&) const = default;
};

/// Per-feature-column range for x' = (x - min) / (max - min).
struct MinMaxParams {
  std::vector<std::string> columns;
  std::vector<double> min;
  std::vector<double> max;

  bool operator==(const MinMaxParams&) const = default;
};

/// Feature matrix plus class labels.
///
/// `schema` lists every source column in order, including the label and any
/// dropped socket/constant columns (kept for audit). Feature columns are the
/// numeric and categorical entries; they map one-to-one, in order, onto the
/// columns of `features`. Categorical cells hold the index into the schema
/// entry's `categories`.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<ColumnSchema> schema;
  std::optional<MinMaxParams> normalization;

  std::size_t rows() const { return features.rows; }
  std::size_t feature_count() const { return features.cols; }
  std::vector<std::size_t> feature_schema_indices() const;
  std::vector<std::string> feature_names() const;
  std::string label_name() const;
  std::vector<std::size_t> class_counts() const;

  /// Throws DataError when a structural invariant is broken.
  void validate() const;
};

struct LoadOptions {
  // When non-empty, class indices follow this order and unknown labels are
  // an error. Otherwise classes are numbered by first appearance.
  std::vector<std::string> class_names;
  double max_rejected_fraction = 0.01;
};

struct LoadStats {
  std::size_t data_rows = 0;
  std::size_t rejected_rows = 0;
  std::size_t imputed_values = 0;
};

/// Reads a header-first CSV. A column is numeric when every cell parses as a
/// number (blank cells count as missing and are imputed with 0, infinities
/// with the column's finite extreme); otherwise it is categorical.
Dataset load_flow_csv(const std::filesystem::path& path, const std::string& label_column,
                      const LoadOptions& options = {}, LoadStats* stats = nullptr);

/// Default socket-identity column names for the UNSW-NB15 and CICIDS2019
/// layouts (addresses, ports, timestamps, flow ids).
const std::vector<std::string>& default_socket_columns();

/// Removes the named socket columns and every feature column whose value is
/// identical on all rows. Name matching ignores case and surrounding spaces.
Dataset drop_socket_and_constant_features(const Dataset& d, const std::vector<std::string>& socket_names);

/// Category order per categorical column, learned from a training split.
struct OneHotEncoder {
  struct Column {
    std::string name;
    std::vector<std::string> categories;  // first-seen order in the fitted rows
  };
  std::vector<Column> columns;

  bool operator==(const OneHotEncoder&) const = default;
};

OneHotEncoder fit_one_hot(const Dataset& train);

/// Replaces every categorical column by one binary column per fitted
/// category. Categories the encoder never saw encode as all zeros (logged).
Dataset one_hot_encode(const Dataset& d, const OneHotEncoder& encoder);
inline Dataset one_hot_encode(const Dataset& d) { return one_hot_encode(d, fit_one_hot(d)); }

MinMaxParams min_max_fit(const Dataset& train);

/// Maps every feature to [0, 1]. Zero-range columns map to 0; values outside
/// the fitted range are clamped.
Dataset min_max_apply(const Dataset& d, const MinMaxParams& params);

/// Inverse affine map (no unclamping); used for audits.
Matrix min_max_invert(const Matrix& normalized, const MinMaxParams& params);

/// Per-class split; each class contributes round(count * train_fraction)
/// training rows, kept in their original relative order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed);

/// Stratified subsample down to at most `max_rows` rows (identity when smaller).
Dataset stratified_subsample(const Dataset& d, std::size_t max_rows, std::uint64_t seed);

Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& rows);

/// Rows of `extra` appended after the rows of `base`; schemas must agree.
Dataset concat_rows(const Dataset& base, const Dataset& extra);

struct ExtraColumn {
  std::string name;
  std::vector<std::string> values;
};

/// Writes features plus the label (as class name) with round-trip precision.
void write_dataset_csv(const Dataset& d, const std::filesystem::path& path,
                       const std::vector<ExtraColumn>& extra = {});

}  // namespace ddosnet::flowdata
