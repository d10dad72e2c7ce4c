#include "ddosnet/flowdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ddosnet/log.hpp"
#include "ddosnet/random.hpp"

namespace ddosnet::flowdata {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

// Parsed numeric cell; nullopt when the text is not a number.
std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

bool is_feature(ColumnKind k) { return k == ColumnKind::numeric || k == ColumnKind::categorical; }

}  // namespace

const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::label: return "label";
    case ColumnKind::socket: return "socket";
    case ColumnKind::constant: return "constant";
  }
  return "?";
}

ColumnKind column_kind_from_string(const std::string& text) {
  for (auto k : {ColumnKind::numeric, ColumnKind::categorical, ColumnKind::label, ColumnKind::socket,
                 ColumnKind::constant})
    if (text == to_string(k)) return k;
  throw DataError("unknown column kind '" + text + "'");
}

// ---- Dataset --------------------------------------------------------------

std::vector<std::size_t> Dataset::feature_schema_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (is_feature(schema[i].kind)) idx.push_back(i);
  return idx;
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  for (auto i : feature_schema_indices()) names.push_back(schema[i].name);
  return names;
}

std::string Dataset::label_name() const {
  for (const auto& c : schema)
    if (c.kind == ColumnKind::label) return c.name;
  return "label";
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

void Dataset::validate() const {
  const auto n_labels = std::count_if(schema.begin(), schema.end(),
                                      [](const ColumnSchema& c) { return c.kind == ColumnKind::label; });
  if (n_labels != 1) throw DataError("schema must have exactly one label column");
  for (const auto& c : schema)
    if ((c.kind == ColumnKind::categorical) != !c.categories.empty())
      throw DataError("column '" + c.name + "': categories must be non-empty iff categorical");
  if (feature_schema_indices().size() != features.cols)
    throw DataError("feature count does not match retained schema columns");
  if (labels.size() != features.rows) throw DataError("label count does not match row count");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= class_names.size())
      throw DataError("label index out of range");
  if (normalization) {
    for (double v : features.values)
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("normalized feature outside [0, 1]");
  }
}

// ---- load -----------------------------------------------------------------

Dataset load_flow_csv(const std::filesystem::path& path, const std::string& label_column,
                      const LoadOptions& options, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const auto label_it = std::find_if(header.begin(), header.end(),
                                     [&](const std::string& h) { return trim(h) == trim(label_column); });
  if (label_it == header.end())
    throw DataError("label column '" + label_column + "' not found in '" + path.string() + "'");
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<std::string>> cells(header.size());
  LoadStats local;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++local.data_rows;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      ++local.rejected_rows;
      continue;
    }
    for (std::size_t c = 0; c < fields.size(); ++c) cells[c].push_back(std::move(fields[c]));
  }
  if (local.data_rows > 0 &&
      static_cast<double>(local.rejected_rows) > options.max_rejected_fraction * static_cast<double>(local.data_rows)) {
    throw DataError(std::to_string(local.rejected_rows) + " of " + std::to_string(local.data_rows) +
                    " rows in '" + path.string() + "' have the wrong field count");
  }
  if (local.rejected_rows)
    log_warning("rejected " + std::to_string(local.rejected_rows) + " malformed rows in " + path.string());

  const std::size_t n = cells[label_idx].size();
  Dataset d;
  d.labels.resize(n);
  std::unordered_map<std::string, int> class_index;
  d.class_names = options.class_names;
  for (std::size_t i = 0; i < d.class_names.size(); ++i) class_index[d.class_names[i]] = static_cast<int>(i);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& v = cells[label_idx][r];
    auto it = class_index.find(v);
    if (it == class_index.end()) {
      if (!options.class_names.empty()) throw DataError("unknown class label '" + v + "'");
      it = class_index.emplace(v, static_cast<int>(d.class_names.size())).first;
      d.class_names.push_back(v);
    }
    d.labels[r] = it->second;
  }

  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    ColumnSchema col{trim(header[c]), ColumnKind::numeric, {}};
    if (c == label_idx) {
      col.kind = ColumnKind::label;
      d.schema.push_back(std::move(col));
      continue;
    }
    std::vector<double> values(n);
    bool numeric = true;
    for (std::size_t r = 0; r < n && numeric; ++r) {
      auto parsed = parse_number(cells[c][r]);
      if (!parsed) numeric = false;
      else values[r] = *parsed;
    }
    if (numeric) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (double v : values)
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
      if (!std::isfinite(lo)) lo = hi = 0.0;
      for (double& v : values) {
        if (std::isfinite(v)) continue;
        ++local.imputed_values;
        v = std::isnan(v) ? 0.0 : (v > 0 ? hi : lo);
      }
    } else {
      col.kind = ColumnKind::categorical;
      std::unordered_map<std::string, std::size_t> seen;
      for (std::size_t r = 0; r < n; ++r) {
        auto [it, inserted] = seen.emplace(cells[c][r], col.categories.size());
        if (inserted) col.categories.push_back(cells[c][r]);
        values[r] = static_cast<double>(it->second);
      }
    }
    d.schema.push_back(std::move(col));
    columns.push_back(std::move(values));
  }

  d.features = Matrix(n, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t r = 0; r < n; ++r) d.features(r, c) = columns[c][r];
  d.validate();
  if (stats) *stats = local;
  return d;
}

const std::vector<std::string>& default_socket_columns() {
  static const std::vector<std::string> names = {
      // UNSW-NB15
      "srcip", "sport", "dstip", "dsport", "stime", "ltime",
      // CICIDS2019
      "Unnamed: 0", "Flow ID", "Source IP", "Source Port", "Destination IP", "Destination Port",
      "Timestamp", "SimillarHTTP",
      // generic spellings
      "src_ip", "dst_ip", "src_port", "dst_port", "timestamp", "flow_id"};
  return names;
}

// ---- feature dropping -----------------------------------------------------

Dataset drop_socket_and_constant_features(const Dataset& d, const std::vector<std::string>& socket_names) {
  std::set<std::string> wanted;
  for (const auto& s : socket_names) wanted.insert(lower(trim(s)));
  std::set<std::string> matched;

  Dataset out;
  out.labels = d.labels;
  out.class_names = d.class_names;
  out.normalization = d.normalization;
  out.schema = d.schema;

  std::vector<std::size_t> keep;
  std::size_t feature_col = 0;
  for (auto& col : out.schema) {
    const std::string key = lower(trim(col.name));
    if (col.kind == ColumnKind::label) {
      if (wanted.count(key)) {
        matched.insert(key);
        log_warning("socket list names the label column '" + col.name + "'; kept");
      }
      continue;
    }
    if (wanted.count(key)) matched.insert(key);
    if (!is_feature(col.kind)) continue;
    const std::size_t fc = feature_col++;
    if (wanted.count(key)) {
      col.kind = ColumnKind::socket;
      col.categories.clear();
      continue;
    }
    bool constant = true;
    for (std::size_t r = 1; r < d.rows() && constant; ++r)
      constant = d.features(r, fc) == d.features(0, fc);
    if (constant) {
      col.kind = ColumnKind::constant;
      col.categories.clear();
      continue;
    }
    keep.push_back(fc);
  }
  std::string missing;
  for (const auto& s : socket_names)
    if (!matched.count(lower(trim(s)))) missing += (missing.empty() ? "" : ", ") + s;
  if (!missing.empty()) log_warning("socket columns not present, ignored: " + missing);

  out.features = Matrix(d.rows(), keep.size());
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t c = 0; c < keep.size(); ++c) out.features(r, c) = d.features(r, keep[c]);
  if (out.normalization) {
    MinMaxParams p;
    for (auto c : keep) {
      p.columns.push_back(d.normalization->columns.at(c));
      p.min.push_back(d.normalization->min.at(c));
      p.max.push_back(d.normalization->max.at(c));
    }
    out.normalization = p;
  }
  return out;
}

// ---- one-hot --------------------------------------------------------------

OneHotEncoder fit_one_hot(const Dataset& train) {
  OneHotEncoder enc;
  const auto idx = train.feature_schema_indices();
  for (std::size_t fc = 0; fc < idx.size(); ++fc) {
    const auto& col = train.schema[idx[fc]];
    if (col.kind != ColumnKind::categorical) continue;
    OneHotEncoder::Column ec{col.name, {}};
    std::vector<bool> seen(col.categories.size(), false);
    for (std::size_t r = 0; r < train.rows(); ++r) {
      const auto cat = static_cast<std::size_t>(train.features(r, fc));
      if (!seen.at(cat)) {
        seen[cat] = true;
        ec.categories.push_back(col.categories[cat]);
      }
    }
    enc.columns.push_back(std::move(ec));
  }
  return enc;
}

Dataset one_hot_encode(const Dataset& d, const OneHotEncoder& encoder) {
  const auto idx = d.feature_schema_indices();
  struct Plan {
    std::size_t source;
    const OneHotEncoder::Column* enc;
    std::vector<int> position;  // raw category index -> output offset or -1
  };
  std::vector<Plan> plans;
  Dataset out;
  out.labels = d.labels;
  out.class_names = d.class_names;
  std::size_t width = 0;
  std::size_t fc = 0;
  for (std::size_t s = 0; s < d.schema.size(); ++s) {
    const auto& col = d.schema[s];
    if (!is_feature(col.kind)) {
      out.schema.push_back(col);
      continue;
    }
    Plan plan{fc++, nullptr, {}};
    if (col.kind == ColumnKind::categorical) {
      auto it = std::find_if(encoder.columns.begin(), encoder.columns.end(),
                             [&](const OneHotEncoder::Column& c) { return c.name == col.name; });
      if (it == encoder.columns.end())
        throw DataError("one_hot_encode: encoder has no entry for column '" + col.name + "'");
      plan.enc = &*it;
      plan.position.assign(col.categories.size(), -1);
      for (std::size_t k = 0; k < it->categories.size(); ++k) {
        auto pos = std::find(col.categories.begin(), col.categories.end(), it->categories[k]);
        if (pos != col.categories.end()) plan.position[pos - col.categories.begin()] = static_cast<int>(k);
        out.schema.push_back({col.name + "=" + it->categories[k], ColumnKind::numeric, {}});
      }
      width += it->categories.size();
    } else {
      out.schema.push_back(col);
      ++width;
    }
    plans.push_back(std::move(plan));
  }
  if (plans.size() != idx.size()) throw DataError("one_hot_encode: schema/feature mismatch");

  out.features = Matrix(d.rows(), width);
  std::size_t unseen = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    std::size_t offset = 0;
    for (const auto& p : plans) {
      const double v = d.features(r, p.source);
      if (!p.enc) {
        out.features(r, offset++) = v;
        continue;
      }
      const int pos = p.position.at(static_cast<std::size_t>(v));
      if (pos >= 0) out.features(r, offset + static_cast<std::size_t>(pos)) = 1.0;
      else ++unseen;
      offset += p.enc->categories.size();
    }
  }
  if (unseen)
    log_warning(std::to_string(unseen) + " categorical value(s) unseen during fitting encoded as all zeros");
  return out;
}

// ---- min-max --------------------------------------------------------------

MinMaxParams min_max_fit(const Dataset& train) {
  if (train.rows() == 0) throw DataError("min_max_fit: empty training set");
  MinMaxParams p;
  p.columns = train.feature_names();
  p.min.assign(train.feature_count(), std::numeric_limits<double>::infinity());
  p.max.assign(train.feature_count(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < train.rows(); ++r)
    for (std::size_t c = 0; c < train.feature_count(); ++c) {
      p.min[c] = std::min(p.min[c], train.features(r, c));
      p.max[c] = std::max(p.max[c], train.features(r, c));
    }
  return p;
}

Dataset min_max_apply(const Dataset& d, const MinMaxParams& params) {
  if (params.columns != d.feature_names())
    throw DataError("min_max_apply: fitted columns do not match dataset columns");
  Dataset out = d;
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t c = 0; c < d.feature_count(); ++c) {
      const double range = params.max[c] - params.min[c];
      double v = range > 0.0 ? (d.features(r, c) - params.min[c]) / range : 0.0;
      out.features(r, c) = std::clamp(v, 0.0, 1.0);
    }
  out.normalization = params;
  return out;
}

Matrix min_max_invert(const Matrix& normalized, const MinMaxParams& params) {
  if (normalized.cols != params.columns.size()) throw DataError("min_max_invert: width mismatch");
  Matrix out = normalized;
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      out(r, c) = params.min[c] + normalized(r, c) * (params.max[c] - params.min[c]);
  return out;
}

// ---- row selection --------------------------------------------------------

Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.class_names = d.class_names;
  out.schema = d.schema;
  out.normalization = d.normalization;
  out.features = Matrix(rows.size(), d.feature_count());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = d.features.row(rows.at(i));
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(d.labels[rows[i]]);
  }
  return out;
}

Dataset concat_rows(const Dataset& base, const Dataset& extra) {
  if (base.feature_count() != extra.feature_count() || base.class_names != extra.class_names)
    throw DataError("concat_rows: datasets do not share a schema");
  Dataset out = base;
  out.features.values.insert(out.features.values.end(), extra.features.values.begin(),
                             extra.features.values.end());
  out.features.rows += extra.rows();
  out.labels.insert(out.labels.end(), extra.labels.begin(), extra.labels.end());
  return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DataError("stratified_split: train_fraction must be in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(d.class_names.size());
  for (std::size_t r = 0; r < d.rows(); ++r) by_class[static_cast<std::size_t>(d.labels[r])].push_back(r);
  std::vector<std::size_t> train, test;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < 2)
      throw DataError("stratified_split: class '" + d.class_names[c] + "' has fewer than 2 rows");
    Rng rng(derive_seed(seed, c));
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(rows.size()) * train_fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {select_rows(d, train), select_rows(d, test)};
}

Dataset stratified_subsample(const Dataset& d, std::size_t max_rows, std::uint64_t seed) {
  if (max_rows == 0 || d.rows() <= max_rows) return d;
  const double fraction = static_cast<double>(max_rows) / static_cast<double>(d.rows());
  std::vector<std::vector<std::size_t>> by_class(d.class_names.size());
  for (std::size_t r = 0; r < d.rows(); ++r) by_class[static_cast<std::size_t>(d.labels[r])].push_back(r);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    Rng rng(derive_seed(seed, c, 1));
    std::shuffle(rows.begin(), rows.end(), rng);
    // rare classes keep at least two rows so they can still be split
    auto n = static_cast<std::size_t>(std::floor(static_cast<double>(rows.size()) * fraction));
    n = std::min(rows.size(), std::max<std::size_t>(n, 2));
    keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(keep.begin(), keep.end());
  return select_rows(d, keep);
}

void write_dataset_csv(const Dataset& d, const std::filesystem::path& path,
                       const std::vector<ExtraColumn>& extra) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const auto names = d.feature_names();
  for (const auto& n : names) out << csv_escape(n) << ',';
  out << csv_escape(d.label_name());
  for (const auto& e : extra) out << ',' << csv_escape(e.name);
  out << '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.feature_count(); ++c) out << format_number(d.features(r, c)) << ',';
    out << csv_escape(d.class_names.at(static_cast<std::size_t>(d.labels[r])));
    for (const auto& e : extra) out << ',' << csv_escape(e.values.at(r));
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace ddosnet::flowdata
