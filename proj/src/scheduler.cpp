#include "mlfas/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mlfas/error.hpp"

namespace mlfas {

MinibatchScheduler::MinibatchScheduler(const SampleSet& data, std::size_t batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (batch_size > data.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds the " + std::to_string(data.size()) +
                      " available samples");
  }
  batches_per_epoch_ = (data.size() + batch_size - 1) / batch_size;
  order_.resize(data.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

void MinibatchScheduler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
  ++epoch_;
}

std::vector<std::size_t> MinibatchScheduler::next_indices() {
  if (cursor_ == batches_per_epoch_) reshuffle();
  const std::size_t begin = cursor_ * batch_size_;
  const std::size_t end = std::min(begin + batch_size_, order_.size());
  ++cursor_;
  return {order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end)};
}

Minibatch MinibatchScheduler::next_batch() {
  const auto idx = next_indices();
  return data_->gather(idx);
}

std::vector<Minibatch> MinibatchScheduler::next_tau_group(std::size_t m) {
  if (m == 0) throw ConfigError("tau group size must be positive");
  std::vector<Minibatch> group;
  group.reserve(m);
  for (std::size_t i = 0; i < m; ++i) group.push_back(next_batch());
  return group;
}

}  // namespace mlfas
