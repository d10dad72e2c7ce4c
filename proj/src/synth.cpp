#include "ddosnet/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ddosnet/random.hpp"

namespace ddosnet::synth {

void SyntheticSpec::validate() const {
  if (class_names.size() < 2) throw std::invalid_argument("synthetic data needs at least two classes");
  if (proportions.size() != class_names.size())
    throw std::invalid_argument("synthetic proportions must match the class list");
  for (double p : proportions)
    if (!(p > 0)) throw std::invalid_argument("synthetic proportions must be positive");
  if (numeric_features < 1) throw std::invalid_argument("synthetic data needs at least one numeric feature");
  if (rows < class_names.size()) throw std::invalid_argument("synthetic data needs at least one row per class");
  if (!(separation >= 0)) throw std::invalid_argument("synthetic separation must be >= 0");
}

std::vector<std::size_t> class_counts(const SyntheticSpec& spec) {
  spec.validate();
  double total = std::accumulate(spec.proportions.begin(), spec.proportions.end(), 0.0);
  std::vector<std::size_t> counts(spec.class_names.size());
  std::size_t assigned = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.rows * spec.proportions[c] / total)));
    assigned += counts[c];
  }
  if (assigned >= spec.rows) throw std::invalid_argument("synthetic proportions leave no rows for the first class");
  counts[0] = spec.rows - assigned;
  return counts;
}

namespace {

std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<std::size_t> write_flow_csv(const SyntheticSpec& spec, const std::filesystem::path& path) {
  auto counts = class_counts(spec);
  const std::size_t k = counts.size(), f = spec.numeric_features;
  Rng rng(derive_seed(spec.seed, "synthetic-flows"));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> centroid(k, std::vector<double>(f));
  for (auto& c : centroid)
    for (double& v : c) v = spec.separation * normal(rng);
  // per-column scale and offset so columns live on very different ranges
  std::vector<double> scale(f), offset(f);
  for (std::size_t j = 0; j < f; ++j) {
    scale[j] = std::pow(10.0, static_cast<double>(j % 4));
    offset[j] = 10.0 * static_cast<double>(j);
  }
  static const char* kProtos[] = {"tcp", "udp", "icmp"};

  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  std::shuffle(labels.begin(), labels.end(), rng);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "srcip,sport,dstip,dsport,proto";
  for (std::size_t j = 0; j < f; ++j) out << ",f" << j;
  out << ",trans_depth," << spec.label_column << '\n';

  std::uniform_int_distribution<int> octet(1, 254), port(1024, 65535);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int y : labels) {
    out << "10.0." << octet(rng) << '.' << octet(rng) << ',' << port(rng) << ",192.168.1." << octet(rng) << ','
        << (unit(rng) < 0.5 ? 80 : 443) << ',';
    // class c favours protocol c mod 3 with probability 0.8
    std::size_t proto = unit(rng) < 0.8 ? static_cast<std::size_t>(y) % 3 : static_cast<std::size_t>(octet(rng)) % 3;
    out << kProtos[proto];
    for (std::size_t j = 0; j < f; ++j) out << ',' << number(offset[j] + scale[j] * (centroid[y][j] + normal(rng)));
    out << ",0," << spec.class_names[y] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  return counts;
}

}  // namespace ddosnet::synth
