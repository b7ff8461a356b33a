#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cgrl/errors.hpp"

namespace cgrl {

/// Fixed-capacity ring buffer; pushing at capacity evicts the oldest item.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
    if (capacity_ == 0) throw InvalidInput("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity_, 4096));
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[next_] = std::move(item);
    }
    next_ = (next_ + 1) % capacity_;
    ++insertions_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insertions() const { return insertions_; }
  bool empty() const { return items_.empty(); }
  void clear() {
    items_.clear();
    next_ = 0;
  }

  /// i-th oldest stored item.
  const T& at(std::size_t i) const {
    if (i >= items_.size()) throw InvalidInput("replay buffer index out of range");
    if (items_.size() < capacity_) return items_[i];
    return items_[(next_ + i) % capacity_];
  }

  /// Uniform sampling with replacement. Refuses when fewer than `batch_size`
  /// items are stored.
  std::vector<T> sample(std::size_t batch_size, std::mt19937_64& rng) const {
    if (items_.size() < batch_size || batch_size == 0)
      throw InvalidInput("replay buffer holds " + std::to_string(items_.size()) +
                         " items, cannot sample " + std::to_string(batch_size));
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<T> out;
    out.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) out.push_back(items_[pick(rng)]);
    return out;
  }

  std::vector<T> sample(std::size_t batch_size, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return sample(batch_size, rng);
  }

 private:
  std::size_t capacity_;
  std::vector<T> items_;
  std::size_t next_ = 0;
  std::uint64_t insertions_ = 0;
};

}  // namespace cgrl
