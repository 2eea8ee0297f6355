#pragma once

#include <cstddef>
#include <vector>

#include "offmmd/common.hpp"

namespace offmmd {

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("ReplayBuffer: capacity must be positive");
    items_.reserve(capacity < (1u << 20) ? capacity : (1u << 20));
  }

  void push(const T& item) {
    if (items_.size() < capacity_) {
      items_.push_back(item);
    } else {
      items_[next_] = item;
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const T& operator[](std::size_t i) const { return items_[i]; }

  void sample(Rng& rng, std::size_t n, std::vector<T>& out) const {
    if (items_.empty()) throw TrainingError("ReplayBuffer: cannot sample from an empty buffer");
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = items_[uniform_index(rng, items_.size())];
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<T> items_;
};

}  // namespace offmmd
