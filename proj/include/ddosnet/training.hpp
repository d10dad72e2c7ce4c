#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ddosnet/matrix.hpp"
#include "ddosnet/ndgrad/ops.hpp"
#include "ddosnet/random.hpp"

namespace ddosnet {

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean cross-entropy over the epoch's rows
  double accuracy = 0.0;  // train-mode accuracy over the epoch's rows
};

struct SoftmaxTrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double max_grad_norm = 0.0;  // > 0 rescales each batch gradient to at most this global norm
  std::uint64_t seed = 1;
};

/// Maps a batch [rows, cols] to logits [rows, classes].
using LogitsFn = std::function<ndgrad::Tensor(const ndgrad::Tensor& batch, ndgrad::Mode mode, Rng& rng)>;

/// Shuffled mini-batch SGD on softmax cross-entropy. Returns one record per epoch.
std::vector<EpochRecord> train_softmax(const LogitsFn& logits, std::vector<ndgrad::Tensor> params, const Matrix& x,
                                       std::span<const int> labels, const SoftmaxTrainOptions& opts);

/// Rows of `m` selected by `idx` as a [idx.size(), cols] tensor.
ndgrad::Tensor gather_rows(const Matrix& m, std::span<const std::size_t> idx);

/// Eval-mode forward in chunks, concatenated back into a matrix.
Matrix forward_rows(const std::function<ndgrad::Tensor(const ndgrad::Tensor&)>& fn, const Matrix& x,
                    std::size_t chunk = 256);

std::string epoch_trace_csv(const std::vector<EpochRecord>& trace);

}  // namespace ddosnet
