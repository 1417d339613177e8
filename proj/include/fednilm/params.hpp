#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fednilm/error.hpp"

namespace fednilm {

struct ParamEntry {
  std::string layer_id;
  std::string name;  // "weight" or "bias"
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const ParamEntry&) const = default;
};

/// Ordered, contiguous description of every parameter tensor in a model.
class ParamLayout {
 public:
  void add(std::string layer_id, std::string name, std::vector<std::size_t> shape);

  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  std::size_t total_size() const noexcept { return total_; }
  const ParamEntry& find(const std::string& layer_id, const std::string& name) const;

  /// Throws StructuralError naming the first divergent layer.
  void require_equal(const ParamLayout& other) const;

  bool operator==(const ParamLayout& other) const { return entries_ == other.entries_; }

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

/// Flat parameter values plus the layout that gives them meaning.
template <typename T>
struct ParamVector {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<T> values;

  std::size_t size() const noexcept { return values.size(); }
  std::span<const T> view(const ParamEntry& e) const { return {values.data() + e.offset, e.size}; }
  std::span<T> view(const ParamEntry& e) { return {values.data() + e.offset, e.size}; }
};

/// Momentum buffer and hyperparameters of the SGD update.
template <typename T>
struct OptimizerState {
  std::vector<T> velocity;
  T eta = T(1e-4);
  T rho = T(0.5);

  OptimizerState() = default;
  OptimizerState(std::size_t n, T eta_, T rho_);
  void validate() const;
};

/// v <- rho * v + d, then w <- w - eta * v.
template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state);

}  // namespace fednilm
