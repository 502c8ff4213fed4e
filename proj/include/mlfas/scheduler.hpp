#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mlfas/dataset.hpp"

namespace mlfas {

/// Shuffled cyclic minibatches over a sample set. Each epoch draws a fresh
/// permutation and cuts it into ceil(n / batch_size) batches (the last one may
/// be short). Single-batch and tau-group draws advance the same cursor.
class MinibatchScheduler {
 public:
  /// `data` must outlive the scheduler. Throws ConfigError if batch_size is 0
  /// or exceeds the sample count.
  MinibatchScheduler(const SampleSet& data, std::size_t batch_size, std::uint64_t seed);

  std::size_t batch_size() const { return batch_size_; }
  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  std::size_t epoch() const { return epoch_; }

  /// Indices of the next batch, in shuffled order.
  std::vector<std::size_t> next_indices();
  Minibatch next_batch();
  std::vector<Minibatch> next_tau_group(std::size_t m);

 private:
  void reshuffle();

  const SampleSet* data_;
  std::size_t batch_size_;
  std::size_t batches_per_epoch_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;  // batch index within the epoch
  std::size_t epoch_ = 0;
};

}  // namespace mlfas
