#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddosnet/hyperparameters.hpp"
#include "ddosnet/random.hpp"

namespace ddosnet::aso {

class AsoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DimensionKind { continuous, integer, categorical };

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  DimensionKind kind = DimensionKind::continuous;
  std::vector<double> choices;  // categorical only

  static Dimension continuous(std::string name, double lower, double upper);
  static Dimension integer(std::string name, double lower, double upper);
  /// Position i in [-0.5, n-0.5) selects choices[round(i)], so each choice
  /// owns an equal-width cell.
  static Dimension categorical(std::string name, std::vector<double> choices);

  double decode(double x) const;
  /// Width of one decode cell measured in position units.
  double cell_width() const;
};

struct SearchSpace {
  std::vector<Dimension> dims;

  std::size_t size() const { return dims.size(); }
  void validate() const;
  std::vector<double> decode(std::span<const double> position) const;
};

/// Shape of the pairwise interaction term. `lennard_jones` uses
/// 2h^-13 - h^-7; `literal` uses 2h^13 - h^7.
enum class ForceLaw { lennard_jones, literal };

struct AsoConfig {
  std::size_t population = 20;
  std::size_t iterations = 200;
  double depth_weight = 50.0;       // alpha
  double multiplier_weight = 0.2;   // beta
  double g0 = 1.1;                  // lower bound on h before drift
  double u = 1.24;                  // h_max
  std::uint64_t seed = 1;
  ForceLaw force_law = ForceLaw::lennard_jones;

  void validate() const;
};

struct Atom {
  std::vector<double> position;
  std::vector<double> velocity;
  double fitness = 0.0;
  double mass = 0.0;
};

struct Population {
  std::vector<Atom> atoms;
  std::vector<double> best_position;
  double best_fitness = 0.0;
};

/// Normalized masses: exp(-(f - best)/(worst - best)) divided by their sum,
/// uniform when all fitnesses agree. Lower fitness is better.
std::vector<double> compute_masses(std::span<const double> fitness);

double depth_function(std::size_t nt, const AsoConfig& cfg);
double drift_factor(std::size_t nt, const AsoConfig& cfg);
double lagrange_multiplier(std::size_t nt, const AsoConfig& cfg);
double h_min(std::size_t nt, const AsoConfig& cfg);

/// r/sigma clamped into [h_min(nt), u]; sigma == 0 yields h_min.
double h_scaled_distance(double distance, double sigma, std::size_t nt, const AsoConfig& cfg);
double h_scaled_distance(std::span<const double> xi, std::span<const double> xj, double sigma, std::size_t nt,
                         const AsoConfig& cfg);

/// Distance from x_i to the centroid of the K-best positions.
double length_scale(std::span<const double> xi, const std::vector<std::span<const double>>& k_best);

/// Bracket of the interaction law; positive means repulsion.
double force_bracket(double h, ForceLaw law);

/// K(nt) = floor(N - (N-2) sqrt(nt/mT)), clamped to [2, N].
std::size_t k_best_count(std::size_t nt, std::size_t n, std::size_t max_iterations);

/// Indices of the K lowest-fitness atoms, ties toward lower index.
std::vector<std::size_t> k_best_indices(const Population& pop, std::size_t k);

/// Sum over j in K_best (j != i) of rand_j * F_ij along (x_j - x_i)/r_ij,
/// with F_ij = -eta(nt) * bracket(h_ij).
std::vector<double> interaction_force(std::size_t i, const Population& pop, std::span<const std::size_t> k_best,
                                      std::size_t nt, const AsoConfig& cfg, Rng& rng);

/// lambda(nt) * (x_best - x_i).
std::vector<double> constraint_force(std::span<const double> xi, std::span<const double> x_best, std::size_t nt,
                                     const AsoConfig& cfg);

/// Moves every atom one iteration: a = (F + G)/m, v = rand*v + a, x += v,
/// then clamps to bounds (zeroing the clamped velocity component). Fitness
/// values must be current. Random draws for atom i come from a substream
/// keyed by (seed, nt, i).
void step(Population& pop, std::size_t nt, const SearchSpace& space, const AsoConfig& cfg);

struct TraceRow {
  std::size_t iteration = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::size_t k = 0;
};

struct AsoResult {
  std::vector<double> best_position;  // raw position
  std::vector<double> best_decoded;
  double best_fitness = 0.0;
  std::vector<TraceRow> trace;
  std::size_t evaluations = 0;
};

/// Objective over decoded positions; lower is better.
using Objective = std::function<double(std::span<const double>)>;

AsoResult optimize(const Objective& objective, const SearchSpace& space, const AsoConfig& cfg);

/// Uniform random search baseline with a fixed evaluation budget.
AsoResult random_search(const Objective& objective, const SearchSpace& space, std::size_t evaluations,
                        std::uint64_t seed);

std::string trace_csv(const std::vector<TraceRow>& trace);

// ---- hyperparameter tuning ------------------------------------------------

/// momentum, log10(lr), log10(weight_decay), batch size index, epochs.
SearchSpace hyperparameter_space();
Hyperparameters decode_hyperparameters(std::span<const double> decoded);
/// Position whose decode reproduces h (h must lie inside the space).
std::vector<double> encode_hyperparameters(const Hyperparameters& h);

struct TuneResult {
  Hyperparameters best;
  double best_error = 0.0;
  AsoResult search;
};

TuneResult tune_hyperparameters(const std::function<double(const Hyperparameters&)>& validation_error,
                                const AsoConfig& cfg);

}  // namespace ddosnet::aso
