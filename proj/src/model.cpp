#include "fednilm/model.hpp"

#include <cmath>
#include <random>

namespace fednilm {
namespace {

constexpr std::array<std::size_t, 4> kBranchDivisors{1, 2, 3, 6};

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& x) {
  auto a = acc.data();
  auto b = x.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

void ModelConfig::validate() const {
  if (appliance_count < 1) throw ConfigError("model needs at least one appliance");
  for (std::size_t c : encoder_channels) {
    if (c == 0) throw ConfigError("encoder channel counts must be positive");
  }
  if (downsample_factors[0] < 1 || downsample_factors[1] < 1) {
    throw ConfigError("downsample factors must be >= 1");
  }
  if (window_len < upsample_factor()) {
    throw ConfigError("window_len " + std::to_string(window_len) +
                      " is shorter than the total downsampling " +
                      std::to_string(upsample_factor()));
  }
  if (pool_branch_count < 1 || pool_branch_count > kBranchDivisors.size()) {
    throw ConfigError("pool_branch_count must lie in [1, 4]");
  }
  if (branch_channels == 0 || decoder_channels == 0) {
    throw ConfigError("branch and decoder channel counts must be positive");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
}

std::size_t ModelConfig::encoded_length() const {
  const std::size_t l1 = ops::pool_output_length(window_len, downsample_factors[0],
                                                 downsample_factors[0]);
  return ops::pool_output_length(l1, downsample_factors[1], downsample_factors[1]);
}

std::vector<std::size_t> ModelConfig::branch_pool_sizes() const {
  const std::size_t len = encoded_length();
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < pool_branch_count; ++i) {
    sizes.push_back((len + kBranchDivisors[i] - 1) / kBranchDivisors[i]);
  }
  return sizes;
}

std::shared_ptr<const ParamLayout> build_layout(const ModelConfig& config) {
  return NilmModel<float>(config).layout();
}

template <typename T>
typename NilmModel<T>::Conv NilmModel<T>::add_conv(ParamLayout& layout, const std::string& id,
                                                   std::size_t cin, std::size_t cout,
                                                   std::size_t kernel) {
  Conv c;
  c.geom = {cin, cout, kernel, kernel / 2};
  layout.add(id, "weight", {cout, cin, kernel});
  c.weight_offset = layout.entries().back().offset;
  layout.add(id, "bias", {cout});
  c.bias_offset = layout.entries().back().offset;
  return c;
}

template <typename T>
NilmModel<T>::NilmModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.encoder_channels;
  auto layout = std::make_shared<ParamLayout>();
  enc1_ = add_conv(*layout, "encoder.conv1", 1, ch[0], 3);
  enc2_ = add_conv(*layout, "encoder.conv2", ch[0], ch[1], 3);
  enc3_ = add_conv(*layout, "encoder.conv3", ch[1], ch[2], 3);
  for (std::size_t i = 0; i < config_.pool_branch_count; ++i) {
    branch_convs_.push_back(add_conv(*layout, "pooling.branch" + std::to_string(i + 1), ch[2],
                                     config_.branch_channels, 1));
  }
  fuse_ = add_conv(*layout, "pooling.fuse",
                   ch[2] + config_.pool_branch_count * config_.branch_channels, ch[2], 1);
  dec_ = add_conv(*layout, "decoder.conv", ch[2], config_.decoder_channels, 3);
  out_ = add_conv(*layout, "decoder.out", config_.decoder_channels, 2 * config_.appliance_count, 1);
  layout_ = std::move(layout);
  params_.assign(layout_->total_size(), T{0});
  grads_.assign(layout_->total_size(), T{0});
  initialize();
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)) per weight tensor, drawn in
// layout order from init_seed. Biases stay zero.
template <typename T>
void NilmModel<T>::initialize() {
  Rng rng(config_.init_seed);
  for (const ParamEntry& e : layout_->entries()) {
    if (e.name != "weight") continue;
    const std::size_t cout = e.shape[0], cin = e.shape[1], k = e.shape[2];
    const double limit = std::sqrt(6.0 / static_cast<double>(cin * k + cout * k));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < e.size; ++i) params_[e.offset + i] = static_cast<T>(dist(rng));
  }
}

template <typename T>
void NilmModel<T>::zero_grad() {
  std::fill(grads_.begin(), grads_.end(), T{0});
}

template <typename T>
ParamVector<T> NilmModel<T>::flatten_params() const {
  return {layout_, params_};
}

template <typename T>
void NilmModel<T>::load_params(const ParamVector<T>& pv) {
  if (!pv.layout) throw StructuralError("parameter vector has no layout");
  layout_->require_equal(*pv.layout);
  if (pv.values.size() != params_.size()) {
    throw StructuralError("parameter vector holds " + std::to_string(pv.values.size()) +
                          " values, model expects " + std::to_string(params_.size()));
  }
  params_ = pv.values;
  cache_.valid = false;
}

template <typename T>
std::span<const T> NilmModel<T>::weight(const Conv& c) const {
  return {params_.data() + c.weight_offset, c.geom.weight_size()};
}
template <typename T>
std::span<const T> NilmModel<T>::bias(const Conv& c) const {
  return {params_.data() + c.bias_offset, c.geom.out_channels};
}
template <typename T>
std::span<T> NilmModel<T>::weight_grad(const Conv& c) {
  return {grads_.data() + c.weight_offset, c.geom.weight_size()};
}
template <typename T>
std::span<T> NilmModel<T>::bias_grad(const Conv& c) {
  return {grads_.data() + c.bias_offset, c.geom.out_channels};
}

template <typename T>
Tensor<T> NilmModel<T>::run_conv(const Conv& c, const Tensor<T>& x) const {
  return ops::conv1d(x, weight(c), bias(c), c.geom);
}

template <typename T>
Tensor<T> NilmModel<T>::conv_backward(const Conv& c, const Tensor<T>& x, const Tensor<T>& dy,
                                      bool want_dx) {
  Tensor<T> dx;
  ops::conv1d_backward(x, weight(c), c.geom, dy, want_dx ? &dx : nullptr, weight_grad(c),
                       bias_grad(c));
  return dx;
}

template <typename T>
Tensor<T> NilmModel<T>::forward(const Tensor<T>& batch, Rng* rng) {
  if (batch.channels() != 1) {
    throw DimensionError("channels", "model input must have 1 channel, got " +
                                         std::to_string(batch.channels()));
  }
  if (batch.length() != config_.window_len) {
    throw DimensionError("length", "model input length " + std::to_string(batch.length()) +
                                       ", expected " + std::to_string(config_.window_len));
  }
  if (training_ && config_.dropout_p > 0.0 && rng == nullptr) {
    throw ParameterError("training-mode forward needs an rng for dropout");
  }
  const auto& f = config_.downsample_factors;
  Cache& c = cache_;
  c.input = batch;
  c.enc1 = ops::relu(run_conv(enc1_, c.input));
  c.pool1 = ops::avg_pool1d(c.enc1, f[0], f[0]);
  c.enc2 = ops::relu(run_conv(enc2_, c.pool1));
  c.pool2 = ops::avg_pool1d(c.enc2, f[1], f[1]);
  c.enc3 = ops::relu(run_conv(enc3_, c.pool2));

  const std::size_t enc_len = c.enc3.length();
  const auto sizes = config_.branch_pool_sizes();
  c.branches.assign(sizes.size(), {});
  std::vector<Tensor<T>> upsampled;
  upsampled.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    BranchCache& bc = c.branches[i];
    bc.pooled = ops::avg_pool1d(c.enc3, sizes[i], sizes[i]);
    bc.activated = ops::relu(run_conv(branch_convs_[i], bc.pooled));
    upsampled.push_back(ops::crop_length(ops::upsample_nearest(bc.activated, sizes[i]), enc_len));
  }
  std::vector<const Tensor<T>*> parts{&c.enc3};
  for (const auto& u : upsampled) parts.push_back(&u);
  c.concat = ops::concat_channels<T>(parts);
  c.fused = ops::relu(run_conv(fuse_, c.concat));

  Rng unused(0);
  auto drop = ops::dropout(c.fused, config_.dropout_p, rng ? *rng : unused, training_);
  c.dropped = std::move(drop.output);
  c.dropout_mask = std::move(drop.mask);

  c.decoded = ops::relu(ops::upsample_conv1d(c.dropped, config_.upsample_factor(),
                                             config_.window_len, weight(dec_), bias(dec_),
                                             dec_.geom));
  c.valid = true;
  return run_conv(out_, c.decoded);
}

template <typename T>
void NilmModel<T>::backward(const Tensor<T>& grad_logits) {
  if (!cache_.valid) throw StructuralError("backward() without a preceding forward()");
  Cache& c = cache_;
  const auto& f = config_.downsample_factors;

  Tensor<T> d = conv_backward(out_, c.decoded, grad_logits, true);
  d = ops::relu_backward(c.decoded, d);
  Tensor<T> d_dropped;
  ops::upsample_conv1d_backward(c.dropped, config_.upsample_factor(), config_.window_len,
                                weight(dec_), dec_.geom, d, &d_dropped, weight_grad(dec_),
                                bias_grad(dec_));
  d = ops::dropout_backward<T>(d_dropped, c.dropout_mask);
  d = ops::relu_backward(c.fused, d);
  d = conv_backward(fuse_, c.concat, d, true);

  std::vector<std::size_t> counts{c.enc3.channels()};
  for (std::size_t i = 0; i < c.branches.size(); ++i) counts.push_back(config_.branch_channels);
  std::vector<Tensor<T>> parts = ops::split_channels<T>(d, counts);
  Tensor<T> d_enc3 = std::move(parts[0]);
  const auto sizes = config_.branch_pool_sizes();
  for (std::size_t i = 0; i < c.branches.size(); ++i) {
    const BranchCache& bc = c.branches[i];
    Tensor<T> db = ops::crop_length_backward(parts[i + 1], bc.activated.length() * sizes[i]);
    db = ops::upsample_nearest_backward(db, sizes[i]);
    db = ops::relu_backward(bc.activated, db);
    db = conv_backward(branch_convs_[i], bc.pooled, db, true);
    add_into(d_enc3, ops::avg_pool1d_backward(db, c.enc3.length(), sizes[i], sizes[i]));
  }

  d = ops::relu_backward(c.enc3, d_enc3);
  d = conv_backward(enc3_, c.pool2, d, true);
  d = ops::avg_pool1d_backward(d, c.enc2.length(), f[1], f[1]);
  d = ops::relu_backward(c.enc2, d);
  d = conv_backward(enc2_, c.pool1, d, true);
  d = ops::avg_pool1d_backward(d, c.enc1.length(), f[0], f[0]);
  d = ops::relu_backward(c.enc1, d);
  conv_backward(enc1_, c.input, d, false);
}

template <typename T>
T NilmModel<T>::loss_and_grad(const Tensor<T>& batch, const Tensor<T>& labels, Rng* rng) {
  Tensor<T> logits = forward(batch, rng);
  auto result = ops::softmax2_bce(logits, labels);
  backward(result.grad_logits);
  return result.loss;
}

template <typename T>
Tensor<T> NilmModel<T>::predict_states(const Tensor<T>& batch) {
  const bool was_training = training_;
  training_ = false;
  const Tensor<T> logits = forward(batch, nullptr);
  training_ = was_training;
  const std::size_t appliances = config_.appliance_count;
  Tensor<T> states(batch.batch(), appliances, logits.length());
  for (std::size_t b = 0; b < batch.batch(); ++b) {
    for (std::size_t i = 0; i < appliances; ++i) {
      const auto off = logits.row(b, 2 * i);
      const auto on = logits.row(b, 2 * i + 1);
      auto dst = states.row(b, i);
      // sigmoid(on - off) >= 0.5 exactly when on - off >= 0.
      for (std::size_t s = 0; s < dst.size(); ++s) dst[s] = on[s] - off[s] >= T{0} ? T{1} : T{0};
    }
  }
  return states;
}

template class NilmModel<float>;
template class NilmModel<double>;
template class NilmModel<long double>;

}  // namespace fednilm
