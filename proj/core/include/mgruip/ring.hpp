#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mgruip/errors.hpp"

namespace mgruip {

/// Fixed-capacity FIFO over a circular vector. Overflow is a contract error,
/// never a reallocation.
template <typename Entry>
class BoundedRing {
 public:
  explicit BoundedRing(std::size_t capacity = 0) : slots_(capacity) {}

  std::size_t capacity() const noexcept { return slots_.size(); }
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool full() const noexcept { return size_ == slots_.size(); }
  std::size_t max_occupancy() const noexcept { return high_water_; }

  void push_back(Entry e) {
    if (full()) throw ContractError("ring buffer overflow (capacity " + std::to_string(capacity()) + ")");
    slots_[(head_ + size_) % slots_.size()] = std::move(e);
    ++size_;
    if (size_ > high_water_) high_water_ = size_;
  }

  void pop_front() {
    if (empty()) throw ContractError("ring buffer underflow");
    slots_[head_] = Entry{};
    head_ = (head_ + 1) % slots_.size();
    --size_;
  }

  /// i-th oldest entry.
  Entry& operator[](std::size_t i) { return slots_[(head_ + i) % slots_.size()]; }
  const Entry& operator[](std::size_t i) const { return slots_[(head_ + i) % slots_.size()]; }
  Entry& front() { return (*this)[0]; }
  const Entry& front() const { return (*this)[0]; }
  const Entry& back() const { return (*this)[size_ - 1]; }

 private:
  std::vector<Entry> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::size_t high_water_ = 0;
};

}  // namespace mgruip
