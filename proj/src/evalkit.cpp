#include "ddosnet/evalkit.hpp"

#include <cstdio>
#include <iomanip>
#include "json.hpp"
#include <sstream>

namespace ddosnet::evalkit {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

nlohmann::json to_json(const ClassMetrics& m) {
  return {{"class", m.name},         {"f1", m.f1},         {"recall", m.recall},
          {"precision", m.precision}, {"accuracy", m.accuracy}, {"support", m.support}};
}

ClassMetrics class_from_json(const nlohmann::json& j) {
  ClassMetrics m;
  m.name = j.at("class").get<std::string>();
  m.f1 = j.at("f1").get<double>();
  m.recall = j.at("recall").get<double>();
  m.precision = j.at("precision").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  m.support = j.at("support").get<std::uint64_t>();
  return m;
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& r : counts)
    for (auto v : r) t += v;
  return t;
}

ConfusionMatrix confusion_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                           std::size_t n_classes, std::vector<std::string> class_names) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion_from_predictions: label vectors differ in length");
  if (class_names.empty())
    for (std::size_t c = 0; c < n_classes; ++c) class_names.push_back(std::to_string(c));
  if (class_names.size() != n_classes) throw std::invalid_argument("confusion_from_predictions: class name count");
  ConfusionMatrix m{std::move(class_names), std::vector<std::vector<std::uint64_t>>(n_classes, std::vector<std::uint64_t>(n_classes, 0))};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
      throw std::out_of_range("confusion_from_predictions: label " + std::to_string(t) + "/" + std::to_string(p) +
                              " outside [0, " + std::to_string(n_classes) + ")");
    ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

BinaryCounts one_vs_rest(const ConfusionMatrix& m, std::size_t c) {
  BinaryCounts b;
  std::uint64_t row = 0, col = 0;
  for (std::size_t k = 0; k < m.n_classes(); ++k) {
    row += m.counts[c][k];
    col += m.counts[k][c];
  }
  b.tp = m.counts[c][c];
  b.fn = row - b.tp;
  b.fp = col - b.tp;
  b.tn = m.total() - b.tp - b.fn - b.fp;
  return b;
}

ClassMetrics metrics_from_counts(const BinaryCounts& c) {
  ClassMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.support = c.tp + c.fn;
  return m;
}

MetricsReport per_class_metrics(const ConfusionMatrix& m) {
  MetricsReport r;
  r.rows = m.total();
  r.macro.name = "macro";
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    auto cm = metrics_from_counts(one_vs_rest(m, c));
    cm.name = m.class_names.at(c);
    correct += m.counts[c][c];
    r.macro.accuracy += cm.accuracy;
    r.macro.precision += cm.precision;
    r.macro.recall += cm.recall;
    r.macro.f1 += cm.f1;
    r.macro.support += cm.support;
    r.per_class.push_back(std::move(cm));
  }
  if (m.n_classes()) {
    const double n = static_cast<double>(m.n_classes());
    r.macro.accuracy /= n;
    r.macro.precision /= n;
    r.macro.recall /= n;
    r.macro.f1 /= n;
  }
  r.overall_accuracy = ratio(correct, r.rows);
  return r;
}

ReportFormat report_format_from_string(const std::string& text) {
  if (text == "table") return ReportFormat::table;
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  throw std::invalid_argument("unknown report format '" + text + "'");
}

std::string render_report(const MetricsReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::table: {
      std::size_t w = std::string("Attack types").size();
      for (const auto& c : report.per_class) w = std::max(w, c.name.size());
      w = std::max(w, std::string("Macro average").size());
      auto line = [&](const std::string& name, const ClassMetrics& m) {
        out << std::left << std::setw(static_cast<int>(w)) << name << std::right << "  " << std::setw(8)
            << pct(m.f1) << "  " << std::setw(8) << pct(m.recall) << "  " << std::setw(9) << pct(m.precision)
            << "  " << std::setw(8) << pct(m.accuracy) << '\n';
      };
      out << std::left << std::setw(static_cast<int>(w)) << "Attack types" << std::right << "  "
          << "F1-score" << "  " << "  Recall" << "  " << "Precision" << "  " << "Accuracy" << '\n';
      for (const auto& c : report.per_class) line(c.name, c);
      line("Macro average", report.macro);
      out << "Overall accuracy: " << pct(report.overall_accuracy) << " (" << report.rows << " rows)\n";
      break;
    }
    case ReportFormat::json: {
      nlohmann::json j;
      j["averaging"] = "macro";
      j["rows"] = report.rows;
      j["overall_accuracy"] = report.overall_accuracy;
      j["macro"] = to_json(report.macro);
      j["per_class"] = nlohmann::json::array();
      for (const auto& c : report.per_class) j["per_class"].push_back(to_json(c));
      out << j.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv: {
      out << std::setprecision(17);
      out << "class,f1,recall,precision,accuracy\n";
      for (const auto& c : report.per_class)
        out << c.name << ',' << c.f1 << ',' << c.recall << ',' << c.precision << ',' << c.accuracy << '\n';
      break;
    }
  }
  return out.str();
}

MetricsReport parse_report_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.rows = j.at("rows").get<std::uint64_t>();
  r.overall_accuracy = j.at("overall_accuracy").get<double>();
  r.macro = class_from_json(j.at("macro"));
  for (const auto& c : j.at("per_class")) r.per_class.push_back(class_from_json(c));
  return r;
}

std::string render_confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& n : m.class_names) out << ',' << n;
  out << '\n';
  for (std::size_t t = 0; t < m.n_classes(); ++t) {
    out << m.class_names[t];
    for (auto v : m.counts[t]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace ddosnet::evalkit
