#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fednilm/error.hpp"

namespace fednilm {

/// Dense (batch, channels, length) array. Lower-rank data uses extent 1 on
/// the leading axes. The gradient buffer is allocated on demand.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t batch, std::size_t channels, std::size_t length, T fill = T{0})
      : batch_(batch), channels_(channels), length_(length),
        data_(batch * channels * length, fill) {
    if (batch == 0) throw DimensionError("batch", "extent must be positive");
    if (channels == 0) throw DimensionError("channels", "extent must be positive");
    if (length == 0) throw DimensionError("length", "extent must be positive");
  }
  Tensor(std::size_t batch, std::size_t channels, std::size_t length, std::vector<T> data)
      : Tensor(batch, channels, length) {
    if (data.size() != data_.size()) {
      throw DimensionError("data", "expected " + std::to_string(data_.size()) +
                                       " values, got " + std::to_string(data.size()));
    }
    data_ = std::move(data);
  }

  std::size_t batch() const noexcept { return batch_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t b, std::size_t c, std::size_t l) {
    return data_[(b * channels_ + c) * length_ + l];
  }
  const T& operator()(std::size_t b, std::size_t c, std::size_t l) const {
    return data_[(b * channels_ + c) * length_ + l];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  /// Contiguous row for one (batch, channel) pair.
  std::span<T> row(std::size_t b, std::size_t c) {
    return {data_.data() + (b * channels_ + c) * length_, length_};
  }
  std::span<const T> row(std::size_t b, std::size_t c) const {
    return {data_.data() + (b * channels_ + c) * length_, length_};
  }

  bool has_grad() const noexcept { return !grad_.empty(); }
  std::span<T> grad() {
    if (grad_.empty()) grad_.assign(data_.size(), T{0});
    return grad_;
  }
  std::span<const T> grad() const noexcept { return grad_; }
  void zero_grad() { grad_.assign(data_.size(), T{0}); }

  bool same_shape(const Tensor& other) const noexcept {
    return batch_ == other.batch_ && channels_ == other.channels_ && length_ == other.length_;
  }

 private:
  std::size_t batch_ = 0;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<T> data_;
  std::vector<T> grad_;
};

}  // namespace fednilm
