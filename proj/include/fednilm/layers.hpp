#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fednilm/tensor.hpp"

namespace fednilm {

/// The single RNG engine used everywhere; always constructed from an explicit seed.
using Rng = std::mt19937_64;

namespace ops {

/// Kernel geometry for a 1-D convolution whose weight is stored as
/// [out_channels, in_channels, kernel] in a flat buffer.
struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t padding = 0;

  std::size_t weight_size() const { return out_channels * in_channels * kernel; }
  std::size_t output_length(std::size_t input_length) const;
};

// Cross-correlation with zero padding. Weight is [Cout, Cin, K].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, std::span<const T> weight, std::span<const T> bias,
                 const ConvGeometry& geom);

/// Convenience overload taking the weight as a [Cout, Cin, K] tensor.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                 std::size_t padding);

/// Accumulates into grad_weight / grad_bias; writes grad_input when non-null.
template <typename T>
void conv1d_backward(const Tensor<T>& input, std::span<const T> weight, const ConvGeometry& geom,
                     const Tensor<T>& grad_output, Tensor<T>* grad_input,
                     std::span<T> grad_weight, std::span<T> grad_bias);

/// Nearest upsampling by `factor`, trailing crop to `cropped_length`, then
/// conv1d. Equal to composing the three ops, but the convolution runs at the
/// pre-upsampling resolution.
template <typename T>
Tensor<T> upsample_conv1d(const Tensor<T>& input, std::size_t factor, std::size_t cropped_length,
                          std::span<const T> weight, std::span<const T> bias,
                          const ConvGeometry& geom);

template <typename T>
void upsample_conv1d_backward(const Tensor<T>& input, std::size_t factor,
                              std::size_t cropped_length, std::span<const T> weight,
                              const ConvGeometry& geom, const Tensor<T>& grad_output,
                              Tensor<T>* grad_input, std::span<T> grad_weight,
                              std::span<T> grad_bias);

/// Output length of ceiling-mode pooling. A final window that would start
/// past the end is dropped; a window larger than the signal pools all of it.
std::size_t pool_output_length(std::size_t length, std::size_t size, std::size_t stride);

template <typename T>
Tensor<T> avg_pool1d(const Tensor<T>& input, std::size_t size, std::size_t stride);

template <typename T>
Tensor<T> avg_pool1d_backward(const Tensor<T>& grad_output, std::size_t input_length,
                              std::size_t size, std::size_t stride);

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, std::size_t factor);

template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& grad_output, std::size_t factor);

/// Keeps the first `length` steps.
template <typename T>
Tensor<T> crop_length(const Tensor<T>& input, std::size_t length);

template <typename T>
Tensor<T> crop_length_backward(const Tensor<T>& grad_output, std::size_t input_length);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> inputs);

/// Inverse of concat_channels: slices the channel axis into consecutive blocks.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& input,
                                      std::span<const std::size_t> channel_counts);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Gate is output > 0, so the subgradient at 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_output);

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  std::vector<T> mask;  // 0 or 1/(1-p) per element; empty when identity
};

/// Inverted dropout. Identity (and no RNG draws) when !training or p == 0.
template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double p, Rng& rng, bool training);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_output, std::span<const T> mask);

template <typename T>
struct LossResult {
  T loss = 0;
  Tensor<T> grad_logits;
};

inline constexpr double kLogClamp = 1e-12;

/// Independent two-way softmax per appliance over channels (2i: OFF, 2i+1: ON),
/// binary cross-entropy averaged over batch and steps, summed over appliances.
template <typename T>
LossResult<T> softmax2_bce(const Tensor<T>& logits, const Tensor<T>& labels);

/// ON-probability per appliance: [B, 2I, L] -> [B, I, L].
template <typename T>
Tensor<T> on_probability(const Tensor<T>& logits);

}  // namespace ops
}  // namespace fednilm
