#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fednilm/layers.hpp"
#include "fednilm/params.hpp"
#include "fednilm/tensor.hpp"

namespace fednilm {

struct ModelConfig {
  std::size_t window_len = 126;
  std::size_t appliance_count = 3;
  std::array<std::size_t, 3> encoder_channels{64, 128, 256};
  std::array<std::size_t, 2> downsample_factors{2, 5};
  std::size_t pool_branch_count = 4;
  std::size_t branch_channels = 64;
  std::size_t decoder_channels = 64;
  double dropout_p = 0.1;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t upsample_factor() const { return downsample_factors[0] * downsample_factors[1]; }
  /// Length of the encoder output (ceiling pooling twice).
  std::size_t encoded_length() const;
  /// Pool size (= stride) of each temporal-pooling branch, widest first.
  std::vector<std::size_t> branch_pool_sizes() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Encoder, temporal pooling and decoder with a hand-written backward pass.
/// Parameters live in one flat buffer in layout order.
template <typename T>
class NilmModel {
 public:
  explicit NilmModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::shared_ptr<const ParamLayout>& layout() const noexcept { return layout_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::span<T> params() noexcept { return params_; }
  std::span<const T> params() const noexcept { return params_; }
  std::span<T> grads() noexcept { return grads_; }
  std::span<const T> grads() const noexcept { return grads_; }
  void zero_grad();

  ParamVector<T> flatten_params() const;
  /// Throws StructuralError naming the first divergent layer on layout mismatch.
  void load_params(const ParamVector<T>& pv);

  void set_training(bool training) noexcept { training_ = training; }
  bool training() const noexcept { return training_; }

  /// [B, 1, window_len] -> logits [B, 2I, window_len]. Training mode needs
  /// `rng` for dropout. Activations are kept for the next backward().
  Tensor<T> forward(const Tensor<T>& batch, Rng* rng = nullptr);

  /// Accumulates parameter gradients for the most recent forward().
  void backward(const Tensor<T>& grad_logits);

  /// forward + softmax2_bce + backward; returns the loss.
  T loss_and_grad(const Tensor<T>& batch, const Tensor<T>& labels, Rng* rng);

  /// [B, I, window_len] of {0, 1}; ON iff probability >= 0.5.
  Tensor<T> predict_states(const Tensor<T>& batch);

 private:
  struct Conv {
    ops::ConvGeometry geom;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };
  struct BranchCache {
    Tensor<T> pooled;
    Tensor<T> activated;  // ReLU output at pooled resolution
  };
  struct Cache {
    Tensor<T> input, enc1, pool1, enc2, pool2, enc3;
    std::vector<BranchCache> branches;
    Tensor<T> concat, fused;
    std::vector<T> dropout_mask;
    Tensor<T> dropped, decoded;
    bool valid = false;
  };

  Conv add_conv(ParamLayout& layout, const std::string& id, std::size_t cin, std::size_t cout,
                std::size_t kernel);
  void initialize();
  std::span<const T> weight(const Conv& c) const;
  std::span<const T> bias(const Conv& c) const;
  std::span<T> weight_grad(const Conv& c);
  std::span<T> bias_grad(const Conv& c);
  Tensor<T> run_conv(const Conv& c, const Tensor<T>& x) const;
  Tensor<T> conv_backward(const Conv& c, const Tensor<T>& x, const Tensor<T>& dy, bool want_dx);

  ModelConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  Conv enc1_, enc2_, enc3_;
  std::vector<Conv> branch_convs_;
  Conv fuse_, dec_, out_;
  std::vector<T> params_;
  std::vector<T> grads_;
  bool training_ = false;
  Cache cache_;
};

/// Builds the layout alone (no allocation of parameters).
std::shared_ptr<const ParamLayout> build_layout(const ModelConfig& config);

template <typename T>
NilmModel<T> build_model(const ModelConfig& config) {
  return NilmModel<T>(config);
}

}  // namespace fednilm
