#include "ddosnet/aso.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ddosnet/log.hpp"

namespace ddosnet::aso {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double progress(std::size_t nt, const AsoConfig& cfg) {
  return static_cast<double>(nt) / static_cast<double>(cfg.iterations);
}

std::vector<double> random_position(const SearchSpace& space, Rng& rng) {
  std::vector<double> x(space.size());
  for (std::size_t d = 0; d < space.size(); ++d) {
    std::uniform_real_distribution<double> u(space.dims[d].lower, space.dims[d].upper);
    x[d] = u(rng);
  }
  return x;
}

}  // namespace

// ---- search space ---------------------------------------------------------

Dimension Dimension::continuous(std::string name, double lower, double upper) {
  return Dimension{std::move(name), lower, upper, DimensionKind::continuous, {}};
}

Dimension Dimension::integer(std::string name, double lower, double upper) {
  return Dimension{std::move(name), lower, upper, DimensionKind::integer, {}};
}

Dimension Dimension::categorical(std::string name, std::vector<double> choices) {
  double n = static_cast<double>(choices.size());
  return Dimension{std::move(name), -0.5, n - 0.5, DimensionKind::categorical, std::move(choices)};
}

double Dimension::decode(double x) const {
  x = std::clamp(x, lower, upper);
  switch (kind) {
    case DimensionKind::continuous:
      return x;
    case DimensionKind::integer:
      return std::clamp(std::round(x), std::ceil(lower), std::floor(upper));
    case DimensionKind::categorical: {
      auto idx = static_cast<long>(std::llround(x));
      idx = std::clamp<long>(idx, 0, static_cast<long>(choices.size()) - 1);
      return choices[static_cast<std::size_t>(idx)];
    }
  }
  return x;
}

double Dimension::cell_width() const {
  if (kind == DimensionKind::continuous) return (upper - lower) / 20.0;
  return 1.0;
}

void SearchSpace::validate() const {
  if (dims.empty()) throw std::invalid_argument("search space needs at least one dimension");
  for (const auto& d : dims) {
    if (!(d.lower < d.upper)) throw std::invalid_argument("dimension '" + d.name + "' needs lower < upper");
    if (d.kind == DimensionKind::categorical && d.choices.empty())
      throw std::invalid_argument("categorical dimension '" + d.name + "' has no choices");
  }
}

std::vector<double> SearchSpace::decode(std::span<const double> position) const {
  if (position.size() != dims.size()) throw std::invalid_argument("position has wrong dimensionality");
  std::vector<double> out(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) out[d] = dims[d].decode(position[d]);
  return out;
}

void AsoConfig::validate() const {
  if (population < 2) throw std::invalid_argument("ASO population must be >= 2");
  if (iterations < 1) throw std::invalid_argument("ASO iterations must be >= 1");
  if (!(depth_weight > 0.0)) throw std::invalid_argument("ASO depth weight must be positive");
  if (!(multiplier_weight > 0.0)) throw std::invalid_argument("ASO multiplier weight must be positive");
  if (!(g0 < u)) throw std::invalid_argument("ASO requires g0 < u");
}

// ---- scalar schedule ------------------------------------------------------

std::vector<double> compute_masses(std::span<const double> fitness) {
  if (fitness.empty()) throw std::invalid_argument("compute_masses needs at least one atom");
  for (double f : fitness)
    if (std::isnan(f)) throw AsoError("NaN fitness passed to compute_masses");
  auto [lo, hi] = std::minmax_element(fitness.begin(), fitness.end());
  double best = *lo, worst = *hi;
  std::vector<double> m(fitness.size(), 1.0);
  if (worst > best) {
    for (std::size_t i = 0; i < fitness.size(); ++i) m[i] = std::exp(-(fitness[i] - best) / (worst - best));
  }
  double total = std::accumulate(m.begin(), m.end(), 0.0);
  for (double& v : m) v /= total;
  return m;
}

double depth_function(std::size_t nt, const AsoConfig& cfg) {
  double t = progress(nt, cfg);
  double shrink = 1.0 - static_cast<double>(nt - 1) / static_cast<double>(cfg.iterations);
  return cfg.depth_weight * shrink * shrink * shrink * std::exp(-20.0 * t);
}

double drift_factor(std::size_t nt, const AsoConfig& cfg) {
  return 0.1 * std::sin(std::numbers::pi / 2.0 * progress(nt, cfg));
}

double lagrange_multiplier(std::size_t nt, const AsoConfig& cfg) {
  return cfg.multiplier_weight * std::exp(-20.0 * progress(nt, cfg));
}

double h_min(std::size_t nt, const AsoConfig& cfg) { return cfg.g0 + drift_factor(nt, cfg); }

double h_scaled_distance(double r, double sigma, std::size_t nt, const AsoConfig& cfg) {
  double lo = h_min(nt, cfg);
  if (!(sigma > 0.0)) return lo;
  return std::clamp(r / sigma, lo, std::max(lo, cfg.u));
}

double h_scaled_distance(std::span<const double> xi, std::span<const double> xj, double sigma, std::size_t nt,
                         const AsoConfig& cfg) {
  return h_scaled_distance(distance(xi, xj), sigma, nt, cfg);
}

double length_scale(std::span<const double> xi, const std::vector<std::span<const double>>& k_best) {
  if (k_best.empty()) throw std::invalid_argument("length_scale needs a non-empty K-best set");
  std::vector<double> centroid(xi.size(), 0.0);
  for (auto x : k_best)
    for (std::size_t d = 0; d < xi.size(); ++d) centroid[d] += x[d];
  for (double& c : centroid) c /= static_cast<double>(k_best.size());
  return distance(xi, centroid);
}

double force_bracket(double h, ForceLaw law) {
  if (law == ForceLaw::literal) return 2.0 * std::pow(h, 13) - std::pow(h, 7);
  return 2.0 * std::pow(h, -13) - std::pow(h, -7);
}

std::size_t k_best_count(std::size_t nt, std::size_t n, std::size_t max_iterations) {
  double t = static_cast<double>(nt) / static_cast<double>(max_iterations);
  double nn = static_cast<double>(n);
  // the small slack keeps exact quarter points like sqrt(1/4) from flooring low
  double k = std::floor(nn - (nn - 2.0) * std::sqrt(t) + 1e-9);
  return static_cast<std::size_t>(std::clamp(k, 2.0, nn));
}

std::vector<std::size_t> k_best_indices(const Population& pop, std::size_t k) {
  std::vector<std::size_t> idx(pop.atoms.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return pop.atoms[a].fitness < pop.atoms[b].fitness; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

// ---- forces ---------------------------------------------------------------

std::vector<double> interaction_force(std::size_t i, const Population& pop, std::span<const std::size_t> k_best,
                                      std::size_t nt, const AsoConfig& cfg, Rng& rng) {
  const auto& xi = pop.atoms[i].position;
  std::vector<double> force(xi.size(), 0.0);

  std::vector<std::span<const double>> kb;
  kb.reserve(k_best.size());
  for (std::size_t j : k_best) kb.emplace_back(pop.atoms[j].position);
  double sigma = length_scale(xi, kb);
  double eta = depth_function(nt, cfg);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t j : k_best) {
    if (j == i) continue;
    double rnd = unit(rng);
    const auto& xj = pop.atoms[j].position;
    double r = distance(xi, xj);
    if (r == 0.0) continue;
    double h = h_scaled_distance(r, sigma, nt, cfg);
    double magnitude = -eta * force_bracket(h, cfg.force_law);
    for (std::size_t d = 0; d < xi.size(); ++d) force[d] += rnd * magnitude * (xj[d] - xi[d]) / r;
  }
  return force;
}

std::vector<double> constraint_force(std::span<const double> xi, std::span<const double> x_best, std::size_t nt,
                                     const AsoConfig& cfg) {
  double lambda = lagrange_multiplier(nt, cfg);
  std::vector<double> g(xi.size());
  for (std::size_t d = 0; d < xi.size(); ++d) g[d] = lambda * (x_best[d] - xi[d]);
  return g;
}

void step(Population& pop, std::size_t nt, const SearchSpace& space, const AsoConfig& cfg) {
  std::vector<double> fit(pop.atoms.size());
  for (std::size_t i = 0; i < fit.size(); ++i) fit[i] = pop.atoms[i].fitness;
  auto masses = compute_masses(fit);
  for (std::size_t i = 0; i < fit.size(); ++i) pop.atoms[i].mass = masses[i];

  auto k_best = k_best_indices(pop, k_best_count(nt, pop.atoms.size(), cfg.iterations));

  // all accelerations use the positions from the start of the iteration
  std::vector<std::vector<double>> accel(pop.atoms.size());
  std::vector<Rng> rngs;
  rngs.reserve(pop.atoms.size());
  for (std::size_t i = 0; i < pop.atoms.size(); ++i) {
    rngs.emplace_back(derive_seed(cfg.seed, nt, i));
    auto f = interaction_force(i, pop, k_best, nt, cfg, rngs[i]);
    auto g = constraint_force(pop.atoms[i].position, pop.best_position, nt, cfg);
    accel[i].resize(f.size());
    for (std::size_t d = 0; d < f.size(); ++d) accel[i][d] = (f[d] + g[d]) / pop.atoms[i].mass;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < pop.atoms.size(); ++i) {
    Atom& a = pop.atoms[i];
    for (std::size_t d = 0; d < a.position.size(); ++d) {
      a.velocity[d] = unit(rngs[i]) * a.velocity[d] + accel[i][d];
      a.position[d] += a.velocity[d];
      const auto& dim = space.dims[d];
      if (a.position[d] < dim.lower || a.position[d] > dim.upper) {
        a.position[d] = std::clamp(a.position[d], dim.lower, dim.upper);
        a.velocity[d] = 0.0;
      }
    }
  }
}

// ---- drivers --------------------------------------------------------------

namespace {

double evaluate(const Objective& objective, const SearchSpace& space, Atom& atom, Rng& resample_rng,
                std::size_t& evaluations) {
  double f = objective(space.decode(atom.position));
  ++evaluations;
  if (std::isnan(f)) {
    atom.position = random_position(space, resample_rng);
    f = objective(space.decode(atom.position));
    ++evaluations;
    if (std::isnan(f)) {
      std::ostringstream msg;
      msg << "objective returned NaN twice; last position (";
      for (std::size_t d = 0; d < atom.position.size(); ++d) msg << (d ? ", " : "") << atom.position[d];
      msg << ")";
      throw AsoError(msg.str());
    }
  }
  return f;
}

TraceRow summarize(const Population& pop, std::size_t nt, std::size_t k) {
  double sum = 0.0;
  for (const auto& a : pop.atoms) sum += a.fitness;
  return TraceRow{nt, pop.best_fitness, sum / static_cast<double>(pop.atoms.size()), k};
}

void update_best(Population& pop) {
  for (const auto& a : pop.atoms) {
    if (a.fitness < pop.best_fitness) {
      pop.best_fitness = a.fitness;
      pop.best_position = a.position;
    }
  }
}

}  // namespace

AsoResult optimize(const Objective& objective, const SearchSpace& space, const AsoConfig& cfg) {
  space.validate();
  cfg.validate();

  AsoResult result;
  Population pop;
  pop.atoms.resize(cfg.population);

  Rng init_rng(derive_seed(cfg.seed, "init"));
  for (auto& a : pop.atoms) {
    a.position = random_position(space, init_rng);
    a.velocity.resize(space.size());
    for (std::size_t d = 0; d < space.size(); ++d) {
      double reach = (space.dims[d].upper - space.dims[d].lower) / 10.0;
      std::uniform_real_distribution<double> u(-reach, reach);
      a.velocity[d] = u(init_rng);
    }
  }

  auto evaluate_all = [&](std::size_t nt) {
    for (std::size_t i = 0; i < pop.atoms.size(); ++i) {
      Rng resample(derive_seed(cfg.seed ^ 0x5eedull, nt, i));
      pop.atoms[i].fitness = evaluate(objective, space, pop.atoms[i], resample, result.evaluations);
    }
  };

  evaluate_all(0);
  pop.best_fitness = pop.atoms[0].fitness;
  pop.best_position = pop.atoms[0].position;
  update_best(pop);

  for (std::size_t nt = 1; nt <= cfg.iterations; ++nt) {
    std::size_t k = k_best_count(nt, cfg.population, cfg.iterations);
    step(pop, nt, space, cfg);
    evaluate_all(nt);
    update_best(pop);
    result.trace.push_back(summarize(pop, nt, k));
  }

  result.best_position = pop.best_position;
  result.best_decoded = space.decode(pop.best_position);
  result.best_fitness = pop.best_fitness;
  return result;
}

AsoResult random_search(const Objective& objective, const SearchSpace& space, std::size_t evaluations,
                        std::uint64_t seed) {
  space.validate();
  if (evaluations == 0) throw std::invalid_argument("random_search needs at least one evaluation");
  Rng rng(derive_seed(seed, "random-search"));
  AsoResult result;
  for (std::size_t e = 0; e < evaluations; ++e) {
    auto x = random_position(space, rng);
    double f = objective(space.decode(x));
    ++result.evaluations;
    if (std::isnan(f)) continue;
    if (result.best_position.empty() || f < result.best_fitness) {
      result.best_fitness = f;
      result.best_position = std::move(x);
    }
  }
  if (result.best_position.empty()) throw AsoError("random search never produced a finite objective value");
  result.best_decoded = space.decode(result.best_position);
  return result;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,best_fitness,mean_fitness,K\n";
  for (const auto& r : trace) out << r.iteration << ',' << r.best_fitness << ',' << r.mean_fitness << ',' << r.k << '\n';
  return out.str();
}

// ---- hyperparameters ------------------------------------------------------

SearchSpace hyperparameter_space() {
  SearchSpace s;
  s.dims.push_back(Dimension::continuous("momentum", 0.5, 0.99));
  s.dims.push_back(Dimension::continuous("log10_learning_rate", -4.0, -1.0));
  s.dims.push_back(Dimension::continuous("log10_weight_decay", -4.0, -1.5));
  s.dims.push_back(Dimension::categorical("batch_size", {16, 32, 64, 128}));
  s.dims.push_back(Dimension::integer("epochs", 20, 100));
  return s;
}

Hyperparameters decode_hyperparameters(std::span<const double> decoded) {
  if (decoded.size() != 5) throw std::invalid_argument("hyperparameter vector must have 5 entries");
  Hyperparameters h;
  h.momentum = decoded[0];
  h.learning_rate = std::pow(10.0, decoded[1]);
  h.weight_decay = std::pow(10.0, decoded[2]);
  h.batch_size = static_cast<std::size_t>(std::llround(decoded[3]));
  h.epochs = static_cast<std::size_t>(std::llround(decoded[4]));
  h.validate();
  return h;
}

std::vector<double> encode_hyperparameters(const Hyperparameters& h) {
  auto space = hyperparameter_space();
  const auto& batches = space.dims[3].choices;
  auto it = std::find(batches.begin(), batches.end(), static_cast<double>(h.batch_size));
  if (it == batches.end()) throw std::invalid_argument("batch size not in the search space");
  std::vector<double> x{h.momentum, std::log10(h.learning_rate), std::log10(h.weight_decay),
                        static_cast<double>(it - batches.begin()), static_cast<double>(h.epochs)};
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x[d] < space.dims[d].lower - 1e-12 || x[d] > space.dims[d].upper + 1e-12)
      throw std::invalid_argument("hyperparameter '" + space.dims[d].name + "' outside the search space");
  }
  return x;
}

TuneResult tune_hyperparameters(const std::function<double(const Hyperparameters&)>& validation_error,
                                const AsoConfig& cfg) {
  auto space = hyperparameter_space();
  std::size_t evals = 0;
  auto objective = [&](std::span<const double> decoded) {
    auto h = decode_hyperparameters(decoded);
    double err = validation_error(h);
    ++evals;
    log(LogLevel::debug, "tune eval " + std::to_string(evals) + " error " + std::to_string(err));
    return err;
  };
  TuneResult out;
  out.search = optimize(objective, space, cfg);
  out.best = decode_hyperparameters(out.search.best_decoded);
  out.best_error = out.search.best_fitness;
  return out;
}

}  // namespace ddosnet::aso
