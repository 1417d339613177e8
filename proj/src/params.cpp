#include "fednilm/params.hpp"

#include <cmath>

namespace fednilm {

void ParamLayout::add(std::string layer_id, std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  entries_.push_back({std::move(layer_id), std::move(name), std::move(shape), total_, n});
  total_ += n;
}

const ParamEntry& ParamLayout::find(const std::string& layer_id, const std::string& name) const {
  for (const ParamEntry& e : entries_) {
    if (e.layer_id == layer_id && e.name == name) return e;
  }
  throw StructuralError("no parameter " + layer_id + "." + name + " in layout");
}

void ParamLayout::require_equal(const ParamLayout& other) const {
  const std::size_t n = std::min(entries_.size(), other.entries_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!(entries_[i] == other.entries_[i])) {
      throw StructuralError("parameter layout mismatch at layer '" + entries_[i].layer_id + "." +
                            entries_[i].name + "' (other has '" + other.entries_[i].layer_id +
                            "." + other.entries_[i].name + "')");
    }
  }
  if (entries_.size() != other.entries_.size()) {
    const auto& longer = entries_.size() > n ? entries_ : other.entries_;
    throw StructuralError("parameter layout mismatch at layer '" + longer[n].layer_id +
                          "': entry count " + std::to_string(entries_.size()) + " vs " +
                          std::to_string(other.entries_.size()));
  }
}

template <typename T>
OptimizerState<T>::OptimizerState(std::size_t n, T eta_, T rho_)
    : velocity(n, T{0}), eta(eta_), rho(rho_) {
  validate();
}

template <typename T>
void OptimizerState<T>::validate() const {
  if (!(eta >= T{0}) || !std::isfinite(eta)) throw ParameterError("learning rate must be finite and non-negative");
  if (!(rho >= T{0} && rho < T{1})) throw ParameterError("momentum must lie in [0, 1)");
}

template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw StructuralError("sgd_momentum_step length mismatch: params " +
                          std::to_string(params.size()) + ", grads " +
                          std::to_string(grads.size()) + ", velocity " +
                          std::to_string(state.velocity.size()));
  }
  const T rho = state.rho;
  const T eta = state.eta;
  T* v = state.velocity.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    v[i] = rho * v[i] + grads[i];
    params[i] = params[i] - eta * v[i];
  }
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void sgd_momentum_step(std::span<float>, std::span<const float>, OptimizerState<float>&);
template void sgd_momentum_step(std::span<double>, std::span<const double>, OptimizerState<double>&);

}  // namespace fednilm
