#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddosnet/flowdata.hpp"
#include "ddosnet/matrix.hpp"
#include "ddosnet/ndgrad/layers.hpp"
#include "ddosnet/ndgrad/sgd.hpp"

namespace ddosnet::gan {

class GanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GanConfig {
  std::size_t noise_dim = 32;
  // channels of the dense stem followed by each transposed-conv stage
  std::vector<std::size_t> generator_widths{32, 16, 8};
  std::vector<std::size_t> discriminator_widths{16, 32};
  double leaky_slope = 0.2;
  double learning_rate = 0.05;
  double momentum = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  // false trains the discriminator alone against the initial generator
  bool update_generator = true;

  void validate() const;
};

struct Generator {
  ndgrad::Dense stem;
  ndgrad::BatchNorm1d stem_norm;
  std::vector<ndgrad::ConvTranspose1d> up;
  std::vector<ndgrad::BatchNorm1d> up_norm;
  ndgrad::Conv1d out;
  std::size_t base_length = 1;
  std::size_t features = 0;
  double slope = 0.2;

  /// z [batch, noise_dim] -> rows [batch, features] in (0,1).
  ndgrad::Tensor forward(const ndgrad::Tensor& z, ndgrad::Mode mode) const;
  void collect(const std::string& prefix, ndgrad::StateList& out) const;
};

struct Discriminator {
  std::vector<ndgrad::Conv1d> convs;
  std::vector<ndgrad::BatchNorm1d> norms;  // one per conv after the first
  ndgrad::Conv1d out;
  std::size_t features = 0;
  double slope = 0.2;

  /// rows [batch, features] -> probabilities [batch].
  ndgrad::Tensor forward(const ndgrad::Tensor& x, ndgrad::Mode mode) const;
  void collect(const std::string& prefix, ndgrad::StateList& out) const;
};

struct EpochLoss {
  double generator = 0.0;
  double discriminator = 0.0;
};

struct GanPair {
  Generator generator;
  Discriminator discriminator;
  ndgrad::SgdState generator_sgd;
  ndgrad::SgdState discriminator_sgd;
  std::vector<EpochLoss> history;
  std::size_t batch_size = 0;  // effective batch size used

  ndgrad::StateList state() const;
};

GanPair make_gan(std::size_t features, const GanConfig& cfg);

ndgrad::Tensor generator_forward(const GanPair& g, const ndgrad::Tensor& z,
                                 ndgrad::Mode mode = ndgrad::Mode::eval);
ndgrad::Tensor discriminator_forward(const GanPair& g, const ndgrad::Tensor& x,
                                     ndgrad::Mode mode = ndgrad::Mode::eval);

/// Mean of -log D(G(z)).
ndgrad::Tensor generator_loss(const ndgrad::Tensor& d_of_fake);
/// Mean of -log D(x) - log(1 - D(G(z))).
ndgrad::Tensor discriminator_loss(const ndgrad::Tensor& d_of_real, const ndgrad::Tensor& d_of_fake);
double generator_loss(std::span<const double> d_of_fake);
double discriminator_loss(std::span<const double> d_of_real, std::span<const double> d_of_fake);

/// Fewer than this many rows and a class cannot be trained.
inline constexpr std::size_t kMinGanRows = 4;

/// Trains on rows that all belong to one class. Throws GanError below
/// kMinGanRows rows.
GanPair train_dcgan(const Matrix& rows, const GanConfig& cfg);

/// Draws n rows from the generator in eval mode, clamped to [0,1].
Matrix sample_rows(const GanPair& g, std::size_t n, Rng& rng);

/// Copies random source rows and adds N(0, sigma) noise, clamped to [0,1].
Matrix jitter_rows(const Matrix& rows, std::size_t n, double sigma, Rng& rng);

enum class AugmentMethod { gan, jitter };

struct ClassAugmentation {
  int label = 0;
  std::size_t original = 0;
  std::size_t generated = 0;
  AugmentMethod method = AugmentMethod::gan;
  std::vector<EpochLoss> history;
};

struct AugmentResult {
  flowdata::Dataset data;
  std::vector<bool> synthetic;  // per row of data
  std::vector<ClassAugmentation> classes;
};

/// Every class below the median class count gets the median as its target.
std::map<int, std::size_t> median_targets(const flowdata::Dataset& d);

/// Appends generated rows per listed class so each reaches its target.
/// Original rows stay in place as a prefix.
AugmentResult oversample_minorities(const flowdata::Dataset& d, const std::map<int, std::size_t>& targets,
                                    const GanConfig& cfg);

}  // namespace ddosnet::gan
