#include "fednilm/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace fednilm::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

std::string str(std::size_t v) { return std::to_string(v); }

template <typename T>
void check_conv_input(const Tensor<T>& input, std::size_t weight_size, const ConvGeometry& g) {
  if (g.kernel % 2 == 0) throw ParameterError("conv1d kernel size must be odd, got " + str(g.kernel));
  if (input.channels() != g.in_channels) {
    throw DimensionError("channels", "conv1d expects " + str(g.in_channels) +
                                         " input channels, got " + str(input.channels()));
  }
  if (weight_size != g.weight_size()) {
    throw DimensionError("weight", "conv1d weight holds " + str(weight_size) + " values, expected " +
                                       str(g.weight_size()));
  }
}

// Valid output range [first, last) for tap k: positions whose source index
// t + k - padding falls inside [0, len).
struct TapRange {
  std::size_t first;
  std::size_t last;
};

TapRange tap_range(std::size_t k, std::size_t padding, std::size_t len, std::size_t out_len) {
  const std::size_t first = std::min(out_len, padding > k ? padding - k : 0);
  const std::size_t end = len + padding > k ? len + padding - k : 0;
  const std::size_t last = std::min(out_len, end);
  return {first, std::max(first, last)};
}

// Lay the batch out as a (Cin*K) x (B*Lout) matrix: row ci*K+k, column b*Lout+t.
template <typename T>
RowMat<T> im2col(const Tensor<T>& x, const ConvGeometry& g, std::size_t out_len) {
  const std::size_t batch = x.batch();
  const std::size_t len = x.length();
  const std::size_t cols = batch * out_len;
  RowMat<T> col(g.in_channels * g.kernel, cols);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t k = 0; k < g.kernel; ++k) {
      T* dst = col.data() + (ci * g.kernel + k) * cols;
      const TapRange r = tap_range(k, g.padding, len, out_len);
      for (std::size_t b = 0; b < batch; ++b) {
        T* out = dst + b * out_len;
        std::fill(out, out + r.first, T{0});
        if (r.last > r.first) std::copy_n(x.row(b, ci).data() + (r.first + k - g.padding), r.last - r.first,
                    out + r.first);
        std::fill(out + r.last, out + out_len, T{0});
      }
    }
  }
  return col;
}

// (B, C, L) -> C x (B*L)
template <typename T>
RowMat<T> channels_by_positions(const Tensor<T>& x) {
  const std::size_t batch = x.batch(), ch = x.channels(), len = x.length();
  RowMat<T> m(ch, batch * len);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(x.row(b, c).data(), len, m.data() + c * batch * len + b * len);
    }
  }
  return m;
}

template <typename T>
Tensor<T> from_channels_by_positions(const RowMat<T>& m, std::size_t batch, std::size_t len) {
  const std::size_t ch = static_cast<std::size_t>(m.rows());
  Tensor<T> out(batch, ch, len);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(m.data() + c * batch * len + b * len, len, out.row(b, c).data());
    }
  }
  return out;
}

// Weight tap k as a contiguous Cout x Cin matrix.
template <typename T>
RowMat<T> weight_tap(std::span<const T> weight, const ConvGeometry& g, std::size_t k) {
  RowMat<T> w(g.out_channels, g.in_channels);
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      w(co, ci) = weight[(co * g.in_channels + ci) * g.kernel + k];
    }
  }
  return w;
}

}  // namespace

std::size_t ConvGeometry::output_length(std::size_t input_length) const {
  const std::size_t padded = input_length + 2 * padding;
  if (padded < kernel) {
    throw DimensionError("length", "conv1d output would be empty: length " + str(input_length) +
                                       " with padding " + str(padding) + " and kernel " +
                                       str(kernel));
  }
  return padded - kernel + 1;
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, std::span<const T> weight, std::span<const T> bias,
                 const ConvGeometry& geom) {
  check_conv_input(input, weight.size(), geom);
  if (bias.size() != geom.out_channels) {
    throw DimensionError("bias", "expected " + str(geom.out_channels) + " values, got " +
                                     str(bias.size()));
  }
  const std::size_t out_len = geom.output_length(input.length());
  const std::size_t batch = input.batch();
  const RowMat<T> col = im2col(input, geom, out_len);
  ConstMapMat<T> w(weight.data(), geom.out_channels, geom.in_channels * geom.kernel);
  RowMat<T> y(geom.out_channels, batch * out_len);
  y.noalias() = w * col;
  for (std::size_t co = 0; co < geom.out_channels; ++co) y.row(co).array() += bias[co];
  return from_channels_by_positions(y, batch, out_len);
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                 std::size_t padding) {
  const ConvGeometry geom{weight.channels(), weight.batch(), weight.length(), padding};
  return conv1d(input, weight.data(), bias, geom);
}

template <typename T>
void conv1d_backward(const Tensor<T>& input, std::span<const T> weight, const ConvGeometry& geom,
                     const Tensor<T>& grad_output, Tensor<T>* grad_input,
                     std::span<T> grad_weight, std::span<T> grad_bias) {
  check_conv_input(input, weight.size(), geom);
  const std::size_t out_len = geom.output_length(input.length());
  if (grad_output.batch() != input.batch() || grad_output.channels() != geom.out_channels ||
      grad_output.length() != out_len) {
    throw DimensionError("grad_output", "conv1d gradient shape does not match forward output");
  }
  if (grad_weight.size() != geom.weight_size() || grad_bias.size() != geom.out_channels) {
    throw DimensionError("weight", "conv1d gradient buffers have the wrong size");
  }
  const std::size_t batch = input.batch();
  const std::size_t rows = geom.in_channels * geom.kernel;
  const RowMat<T> dy = channels_by_positions(grad_output);
  const RowMat<T> col = im2col(input, geom, out_len);

  MapMat<T> dw(grad_weight.data(), geom.out_channels, rows);
  dw.noalias() += dy * col.transpose();
  for (std::size_t co = 0; co < geom.out_channels; ++co) grad_bias[co] += dy.row(co).sum();

  if (grad_input == nullptr) return;
  ConstMapMat<T> w(weight.data(), geom.out_channels, rows);
  RowMat<T> dcol(rows, batch * out_len);
  dcol.noalias() = w.transpose() * dy;
  Tensor<T> dx(batch, geom.in_channels, input.length());
  const std::size_t len = input.length();
  const std::size_t cols = batch * out_len;
  for (std::size_t ci = 0; ci < geom.in_channels; ++ci) {
    for (std::size_t k = 0; k < geom.kernel; ++k) {
      const T* src = dcol.data() + (ci * geom.kernel + k) * cols;
      const TapRange r = tap_range(k, geom.padding, len, out_len);
      if (r.last == r.first) continue;
      for (std::size_t b = 0; b < batch; ++b) {
        T* dst = dx.row(b, ci).data() + (r.first + k - geom.padding);
        const T* from = src + b * out_len + r.first;
        for (std::size_t t = 0; t < r.last - r.first; ++t) dst[t] += from[t];
      }
    }
  }
  *grad_input = std::move(dx);
}

namespace {

void check_upsample_crop(std::size_t in_len, std::size_t factor, std::size_t cropped) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  if (cropped == 0 || cropped > in_len * factor) {
    throw DimensionError("length", "crop length " + str(cropped) + " outside (0, " +
                                       str(in_len * factor) + "]");
  }
}

// For tap k and output step t, entry [k * out_len + t] is the pre-upsampling
// column feeding it, or -1 where the tap reads padding.
std::vector<std::ptrdiff_t> upsampled_sources(std::size_t out_len, const ConvGeometry& g,
                                              std::size_t factor, std::size_t cropped) {
  std::vector<std::ptrdiff_t> src(g.kernel * out_len, -1);
  for (std::size_t k = 0; k < g.kernel; ++k) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::ptrdiff_t j =
          static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(g.padding);
      if (j >= 0 && static_cast<std::size_t>(j) < cropped) {
        src[k * out_len + t] = j / static_cast<std::ptrdiff_t>(factor);
      }
    }
  }
  return src;
}

}  // namespace

template <typename T>
Tensor<T> upsample_conv1d(const Tensor<T>& input, std::size_t factor, std::size_t cropped_length,
                          std::span<const T> weight, std::span<const T> bias,
                          const ConvGeometry& geom) {
  check_conv_input(input, weight.size(), geom);
  check_upsample_crop(input.length(), factor, cropped_length);
  if (bias.size() != geom.out_channels) throw DimensionError("bias", "wrong bias length");
  const std::size_t batch = input.batch();
  const std::size_t in_len = input.length();
  const std::size_t out_len = geom.output_length(cropped_length);
  const RowMat<T> x = channels_by_positions(input);

  const std::vector<std::ptrdiff_t> sources =
      upsampled_sources(out_len, geom, factor, cropped_length);
  RowMat<T> y(geom.out_channels, batch * out_len);
  for (std::size_t co = 0; co < geom.out_channels; ++co) y.row(co).setConstant(bias[co]);
  RowMat<T> z(geom.out_channels, batch * in_len);
  for (std::size_t k = 0; k < geom.kernel; ++k) {
    z.noalias() = weight_tap(weight, geom, k) * x;
    const std::ptrdiff_t* src = sources.data() + k * out_len;
    for (std::size_t co = 0; co < geom.out_channels; ++co) {
      T* dst = y.data() + co * batch * out_len;
      const T* zrow = z.data() + co * batch * in_len;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_len; ++t) {
          if (src[t] >= 0) dst[b * out_len + t] += zrow[b * in_len + src[t]];
        }
      }
    }
  }
  return from_channels_by_positions(y, batch, out_len);
}

template <typename T>
void upsample_conv1d_backward(const Tensor<T>& input, std::size_t factor,
                              std::size_t cropped_length, std::span<const T> weight,
                              const ConvGeometry& geom, const Tensor<T>& grad_output,
                              Tensor<T>* grad_input, std::span<T> grad_weight,
                              std::span<T> grad_bias) {
  check_conv_input(input, weight.size(), geom);
  check_upsample_crop(input.length(), factor, cropped_length);
  const std::size_t batch = input.batch();
  const std::size_t in_len = input.length();
  const std::size_t out_len = geom.output_length(cropped_length);
  if (grad_output.batch() != batch || grad_output.channels() != geom.out_channels ||
      grad_output.length() != out_len) {
    throw DimensionError("grad_output", "upsample_conv1d gradient shape mismatch");
  }
  const RowMat<T> x = channels_by_positions(input);
  const RowMat<T> dy = channels_by_positions(grad_output);
  for (std::size_t co = 0; co < geom.out_channels; ++co) grad_bias[co] += dy.row(co).sum();
  const std::vector<std::ptrdiff_t> sources =
      upsampled_sources(out_len, geom, factor, cropped_length);

  RowMat<T> dx;
  if (grad_input != nullptr) dx = RowMat<T>::Zero(geom.in_channels, batch * in_len);
  RowMat<T> dz(geom.out_channels, batch * in_len);
  for (std::size_t k = 0; k < geom.kernel; ++k) {
    dz.setZero();
    const std::ptrdiff_t* src = sources.data() + k * out_len;
    for (std::size_t co = 0; co < geom.out_channels; ++co) {
      T* dst = dz.data() + co * batch * in_len;
      const T* dyrow = dy.data() + co * batch * out_len;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_len; ++t) {
          if (src[t] >= 0) dst[b * in_len + src[t]] += dyrow[b * out_len + t];
        }
      }
    }
    const RowMat<T> dwk = dz * x.transpose();
    for (std::size_t co = 0; co < geom.out_channels; ++co) {
      for (std::size_t ci = 0; ci < geom.in_channels; ++ci) {
        grad_weight[(co * geom.in_channels + ci) * geom.kernel + k] += dwk(co, ci);
      }
    }
    if (grad_input != nullptr) dx.noalias() += weight_tap(weight, geom, k).transpose() * dz;
  }
  if (grad_input != nullptr) *grad_input = from_channels_by_positions(dx, batch, in_len);
}

std::size_t pool_output_length(std::size_t length, std::size_t size, std::size_t stride) {
  if (size < 1 || stride < 1) throw ParameterError("pool size and stride must be >= 1");
  if (length == 0) throw DimensionError("length", "cannot pool an empty signal");
  if (size >= length) return 1;
  std::size_t out = (length - size + stride - 1) / stride + 1;
  if ((out - 1) * stride >= length) --out;
  return out;
}

template <typename T>
Tensor<T> avg_pool1d(const Tensor<T>& input, std::size_t size, std::size_t stride) {
  const std::size_t len = input.length();
  const std::size_t out_len = pool_output_length(len, size, stride);
  Tensor<T> y(input.batch(), input.channels(), out_len);
  for (std::size_t b = 0; b < input.batch(); ++b) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      const auto src = input.row(b, c);
      auto dst = y.row(b, c);
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::size_t begin = j * stride;
        const std::size_t end = std::min(begin + size, len);
        T acc = 0;
        for (std::size_t i = begin; i < end; ++i) acc += src[i];
        dst[j] = acc / static_cast<T>(end - begin);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> avg_pool1d_backward(const Tensor<T>& grad_output, std::size_t input_length,
                              std::size_t size, std::size_t stride) {
  const std::size_t out_len = pool_output_length(input_length, size, stride);
  if (grad_output.length() != out_len) {
    throw DimensionError("length", "avg_pool1d gradient has length " + str(grad_output.length()) +
                                       ", expected " + str(out_len));
  }
  Tensor<T> dx(grad_output.batch(), grad_output.channels(), input_length);
  for (std::size_t b = 0; b < grad_output.batch(); ++b) {
    for (std::size_t c = 0; c < grad_output.channels(); ++c) {
      const auto src = grad_output.row(b, c);
      auto dst = dx.row(b, c);
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::size_t begin = j * stride;
        const std::size_t end = std::min(begin + size, input_length);
        const T share = src[j] / static_cast<T>(end - begin);
        for (std::size_t i = begin; i < end; ++i) dst[i] += share;
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, std::size_t factor) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  Tensor<T> y(input.batch(), input.channels(), input.length() * factor);
  for (std::size_t b = 0; b < input.batch(); ++b) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      const auto src = input.row(b, c);
      auto dst = y.row(b, c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i / factor];
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_nearest_backward(const Tensor<T>& grad_output, std::size_t factor) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  if (grad_output.length() % factor != 0) {
    throw DimensionError("length", "gradient length " + str(grad_output.length()) +
                                       " is not a multiple of factor " + str(factor));
  }
  Tensor<T> dx(grad_output.batch(), grad_output.channels(), grad_output.length() / factor);
  for (std::size_t b = 0; b < grad_output.batch(); ++b) {
    for (std::size_t c = 0; c < grad_output.channels(); ++c) {
      const auto src = grad_output.row(b, c);
      auto dst = dx.row(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i / factor] += src[i];
    }
  }
  return dx;
}

template <typename T>
Tensor<T> crop_length(const Tensor<T>& input, std::size_t length) {
  if (length == 0 || length > input.length()) {
    throw DimensionError("length", "crop to " + str(length) + " from " + str(input.length()));
  }
  Tensor<T> y(input.batch(), input.channels(), length);
  for (std::size_t b = 0; b < input.batch(); ++b) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      std::copy_n(input.row(b, c).data(), length, y.row(b, c).data());
    }
  }
  return y;
}

template <typename T>
Tensor<T> crop_length_backward(const Tensor<T>& grad_output, std::size_t input_length) {
  if (grad_output.length() > input_length) {
    throw DimensionError("length", "cropped gradient longer than the input");
  }
  Tensor<T> dx(grad_output.batch(), grad_output.channels(), input_length);
  for (std::size_t b = 0; b < grad_output.batch(); ++b) {
    for (std::size_t c = 0; c < grad_output.channels(); ++c) {
      std::copy_n(grad_output.row(b, c).data(), grad_output.length(), dx.row(b, c).data());
    }
  }
  return dx;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> inputs) {
  if (inputs.empty()) throw ParameterError("concat_channels needs at least one input");
  const std::size_t batch = inputs.front()->batch();
  const std::size_t len = inputs.front()->length();
  std::size_t channels = 0;
  for (const Tensor<T>* t : inputs) {
    if (t->batch() != batch) throw DimensionError("batch", "concat inputs disagree on batch size");
    if (t->length() != len) {
      throw DimensionError("length", "concat inputs disagree on length (" + str(len) + " vs " +
                                         str(t->length()) + ")");
    }
    channels += t->channels();
  }
  Tensor<T> y(batch, channels, len);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t offset = 0;
    for (const Tensor<T>* t : inputs) {
      for (std::size_t c = 0; c < t->channels(); ++c) {
        std::copy_n(t->row(b, c).data(), len, y.row(b, offset + c).data());
      }
      offset += t->channels();
    }
  }
  return y;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& input,
                                      std::span<const std::size_t> channel_counts) {
  std::size_t total = 0;
  for (std::size_t c : channel_counts) total += c;
  if (total != input.channels()) {
    throw DimensionError("channels", "split sizes sum to " + str(total) + ", tensor has " +
                                         str(input.channels()));
  }
  std::vector<Tensor<T>> out;
  out.reserve(channel_counts.size());
  std::size_t offset = 0;
  for (std::size_t count : channel_counts) {
    Tensor<T> part(input.batch(), count, input.length());
    for (std::size_t b = 0; b < input.batch(); ++b) {
      for (std::size_t c = 0; c < count; ++c) {
        std::copy_n(input.row(b, offset + c).data(), input.length(), part.row(b, c).data());
      }
    }
    offset += count;
    out.push_back(std::move(part));
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> y = input;
  for (T& v : y.data()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_output) {
  if (!output.same_shape(grad_output)) throw DimensionError("shape", "relu gradient shape mismatch");
  Tensor<T> dx = grad_output;
  auto out = output.data();
  auto d = dx.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(out[i] > T{0})) d[i] = T{0};
  }
  return dx;
}

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout probability must lie in [0, 1)");
  DropoutResult<T> result{input, {}};
  if (!training || p == 0.0) return result;
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  result.mask.resize(input.size());
  auto y = result.output.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    result.mask[i] = uniform(rng) < p ? T{0} : scale;
    y[i] *= result.mask[i];
  }
  return result;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_output, std::span<const T> mask) {
  Tensor<T> dx = grad_output;
  if (mask.empty()) return dx;
  if (mask.size() != dx.size()) throw DimensionError("shape", "dropout mask size mismatch");
  auto d = dx.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= mask[i];
  return dx;
}

namespace {

// Numerically stable logistic function.
template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <typename T>
LossResult<T> softmax2_bce(const Tensor<T>& logits, const Tensor<T>& labels) {
  if (logits.channels() % 2 != 0 || logits.channels() / 2 != labels.channels()) {
    throw DimensionError("channels", "logits need 2 channels per appliance: got " +
                                         str(logits.channels()) + " logits for " +
                                         str(labels.channels()) + " label channels");
  }
  if (logits.batch() != labels.batch()) throw DimensionError("batch", "logits/labels batch mismatch");
  if (logits.length() != labels.length()) {
    throw DimensionError("length", "logits/labels length mismatch");
  }
  for (T v : labels.data()) {
    if (v != T{0} && v != T{1}) throw ValidationError("labels must be 0 or 1");
  }
  const std::size_t batch = logits.batch();
  const std::size_t appliances = labels.channels();
  const std::size_t len = logits.length();
  const T clamp = static_cast<T>(kLogClamp);
  const T inv_count = T{1} / static_cast<T>(batch * len);

  LossResult<T> result{T{0}, Tensor<T>(batch, logits.channels(), len)};
  for (std::size_t i = 0; i < appliances; ++i) {
    T appliance_loss = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto off = logits.row(b, 2 * i);
      const auto on = logits.row(b, 2 * i + 1);
      const auto y = labels.row(b, i);
      auto g_off = result.grad_logits.row(b, 2 * i);
      auto g_on = result.grad_logits.row(b, 2 * i + 1);
      for (std::size_t s = 0; s < len; ++s) {
        const T diff = on[s] - off[s];
        const T p = sigmoid(diff);
        const T q = sigmoid(-diff);
        // d(loss)/d(diff); zero where the log argument is clamped.
        T g = 0;
        if (y[s] == T{1}) {
          appliance_loss -= std::log(std::max(p, clamp));
          if (p >= clamp) g = -q;
        } else {
          appliance_loss -= std::log(std::max(q, clamp));
          if (q >= clamp) g = p;
        }
        g *= inv_count;
        g_on[s] = g;
        g_off[s] = -g;
      }
    }
    result.loss += appliance_loss * inv_count;
  }
  return result;
}

template <typename T>
Tensor<T> on_probability(const Tensor<T>& logits) {
  if (logits.channels() % 2 != 0) {
    throw DimensionError("channels", "logits need an even channel count");
  }
  const std::size_t appliances = logits.channels() / 2;
  Tensor<T> p(logits.batch(), appliances, logits.length());
  for (std::size_t b = 0; b < logits.batch(); ++b) {
    for (std::size_t i = 0; i < appliances; ++i) {
      const auto off = logits.row(b, 2 * i);
      const auto on = logits.row(b, 2 * i + 1);
      auto dst = p.row(b, i);
      for (std::size_t s = 0; s < logits.length(); ++s) dst[s] = sigmoid(on[s] - off[s]);
    }
  }
  return p;
}

#define FEDNILM_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv1d(const Tensor<T>&, std::span<const T>, std::span<const T>,          \
                            const ConvGeometry&);                                              \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, std::span<const T>,            \
                            std::size_t);                                                      \
  template void conv1d_backward(const Tensor<T>&, std::span<const T>, const ConvGeometry&,     \
                                const Tensor<T>&, Tensor<T>*, std::span<T>, std::span<T>);     \
  template Tensor<T> upsample_conv1d(const Tensor<T>&, std::size_t, std::size_t,               \
                                     std::span<const T>, std::span<const T>,                   \
                                     const ConvGeometry&);                                     \
  template void upsample_conv1d_backward(const Tensor<T>&, std::size_t, std::size_t,           \
                                         std::span<const T>, const ConvGeometry&,              \
                                         const Tensor<T>&, Tensor<T>*, std::span<T>,           \
                                         std::span<T>);                                        \
  template Tensor<T> avg_pool1d(const Tensor<T>&, std::size_t, std::size_t);                   \
  template Tensor<T> avg_pool1d_backward(const Tensor<T>&, std::size_t, std::size_t,           \
                                         std::size_t);                                         \
  template Tensor<T> upsample_nearest(const Tensor<T>&, std::size_t);                          \
  template Tensor<T> upsample_nearest_backward(const Tensor<T>&, std::size_t);                 \
  template Tensor<T> crop_length(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> crop_length_backward(const Tensor<T>&, std::size_t);                      \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                       \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&,                             \
                                                 std::span<const std::size_t>);                \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                        \
  template DropoutResult<T> dropout(const Tensor<T>&, double, Rng&, bool);                     \
  template Tensor<T> dropout_backward(const Tensor<T>&, std::span<const T>);                   \
  template LossResult<T> softmax2_bce(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> on_probability(const Tensor<T>&);

FEDNILM_INSTANTIATE_OPS(float)
FEDNILM_INSTANTIATE_OPS(double)
// Extended precision backs the finite-difference side of full-model checks.
FEDNILM_INSTANTIATE_OPS(long double)

}  // namespace fednilm::ops
