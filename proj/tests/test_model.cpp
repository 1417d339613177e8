#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fednilm/error.hpp"
#include "fednilm/gradcheck.hpp"
#include "fednilm/layers.hpp"
#include "fednilm/model.hpp"
#include "test_support.hpp"

using namespace fednilm;
using fednilm::testing::random_tensor;

namespace {

template <typename T>
Tensor<T> random_labels(std::size_t b, std::size_t apps, std::size_t len, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  Tensor<T> y(b, apps, len);
  for (T& v : y.data()) v = coin(rng) ? T(1) : T(0);
  return y;
}

template <typename T>
void zero_output_layer(NilmModel<T>& m) {
  for (const char* name : {"weight", "bias"}) {
    const ParamEntry& e = m.layout()->find("decoder.out", name);
    std::fill_n(m.params().begin() + static_cast<std::ptrdiff_t>(e.offset), e.size, T(0));
  }
}

}  // namespace

TEST_SUITE("model structure") {
  TEST_CASE("output shape is [B, 2I, 126]") {
    NilmModel<float> m(ModelConfig{});
    Tensor<float> x(4, 1, 126, 0.1f);
    const auto y = m.forward(x);
    CHECK(y.batch() == 4);
    CHECK(y.channels() == 6);
    CHECK(y.length() == 126);
  }

  TEST_CASE("parameter count of the default configuration") {
    // Encoder convs, four k1 branches, k1 fuse over the 512-channel concat,
    // k3 decoder conv and k1 output head.
    const std::size_t expected = (64 * 1 * 3 + 64) + (128 * 64 * 3 + 128) + (256 * 128 * 3 + 256) +
                                 4 * (64 * 256 + 64) + (256 * 512 + 256) + (64 * 256 * 3 + 64) +
                                 (6 * 64 + 6);
    CHECK(expected == 370246);
    NilmModel<float> m(ModelConfig{});
    CHECK(m.param_count() == 370246);
    CHECK(build_layout(ModelConfig{})->total_size() == 370246);
  }

  TEST_CASE("layout order") {
    const auto layout = build_layout(ModelConfig{});
    std::vector<std::string> ids;
    for (const auto& e : layout->entries()) {
      if (ids.empty() || ids.back() != e.layer_id) ids.push_back(e.layer_id);
    }
    CHECK(ids == std::vector<std::string>{"encoder.conv1", "encoder.conv2", "encoder.conv3",
                                          "pooling.branch1", "pooling.branch2", "pooling.branch3",
                                          "pooling.branch4", "pooling.fuse", "decoder.conv",
                                          "decoder.out"});
    std::size_t offset = 0;
    for (const auto& e : layout->entries()) {
      CHECK(e.offset == offset);
      offset += e.size;
    }
  }

  TEST_CASE("derived geometry") {
    const ModelConfig c;
    CHECK(c.encoded_length() == 13);
    CHECK(c.upsample_factor() == 10);
    CHECK(c.branch_pool_sizes() == std::vector<std::size_t>{13, 7, 5, 3});
  }

  TEST_CASE("invalid configurations are rejected") {
    ModelConfig c;
    c.appliance_count = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.dropout_p = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.window_len = 0;
    CHECK_THROWS_AS(NilmModel<float>{c}, ConfigError);
  }

  TEST_CASE("wrong input channel count names the axis") {
    NilmModel<float> m(ModelConfig{});
    Tensor<float> x(1, 2, 126, 0.0f);
    try {
      m.forward(x);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(e.axis() == "channels");
    }
  }
}

TEST_SUITE("model initialization and parameters") {
  TEST_CASE("initialization is a function of the seed") {
    ModelConfig c;
    c.init_seed = 11;
    NilmModel<float> a(c), b(c);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    c.init_seed = 12;
    NilmModel<float> d(c);
    CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), d.params().begin()));
  }

  TEST_CASE("weights lie in the fan-based bound and biases start at zero") {
    NilmModel<double> m(ModelConfig{});
    for (const auto& e : m.layout()->entries()) {
      const auto v = m.params().subspan(e.offset, e.size);
      if (e.name == "bias") {
        CHECK(std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
        continue;
      }
      const double fan_in = static_cast<double>(e.shape[1] * e.shape[2]);
      const double fan_out = static_cast<double>(e.shape[0] * e.shape[2]);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      CHECK(std::all_of(v.begin(), v.end(), [&](double x) { return std::abs(x) <= bound; }));
    }
  }

  TEST_CASE("flatten and load round trip") {
    ModelConfig c;
    c.init_seed = 5;
    NilmModel<float> a(c);
    c.init_seed = 6;
    NilmModel<float> b(c);
    b.load_params(a.flatten_params());
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    Tensor<float> x(2, 1, 126, 0.3f);
    CHECK(a.forward(x).values() == b.forward(x).values());
  }

  TEST_CASE("loading a foreign layout names the divergent layer") {
    ModelConfig two;
    two.appliance_count = 2;
    NilmModel<float> small(two);
    NilmModel<float> m(ModelConfig{});
    try {
      m.load_params(small.flatten_params());
      FAIL("expected StructuralError");
    } catch (const StructuralError& e) {
      CHECK(std::string(e.what()).find("decoder.out") != std::string::npos);
    }
  }
}

TEST_SUITE("model gradients") {
  // Loss of the whole network as a function of its flat parameters, with the
  // dropout mask pinned by reseeding on every evaluation.
  void full_model_check(bool training, std::uint64_t seed) {
    ModelConfig c;
    c.init_seed = seed;
    NilmModel<double> m(c);
    m.set_training(training);
    std::mt19937_64 rng(seed + 100);
    const auto x = random_tensor(2, 1, 126, rng, -1.0, 1.0);
    const auto y = random_labels<double>(2, 3, 126, rng);
    // Nonzero biases so that no ReLU input sits exactly on the kink.
    for (const auto& e : m.layout()->entries()) {
      if (e.name != "bias") continue;
      std::uniform_real_distribution<double> d(-0.1, 0.1);
      for (double& v : m.params().subspan(e.offset, e.size)) v = d(rng);
    }

    m.zero_grad();
    Rng drop(seed);
    m.loss_and_grad(x, y, &drop);
    const std::vector<double> analytic(m.grads().begin(), m.grads().end());
    const std::vector<double> point(m.params().begin(), m.params().end());

    // The numeric side runs in extended precision and reports the loss change
    // relative to the unperturbed point, so a small step stays above roundoff
    // and below the distance to the nearest ReLU kink.
    NilmModel<long double> wide(c);
    wide.set_training(training);
    Tensor<long double> xw(x.batch(), x.channels(), x.length());
    Tensor<long double> yw(y.batch(), y.channels(), y.length());
    std::copy(x.data().begin(), x.data().end(), xw.data().begin());
    std::copy(y.data().begin(), y.data().end(), yw.data().begin());
    auto wide_loss = [&](std::span<const double> w) {
      std::copy(w.begin(), w.end(), wide.params().begin());
      Rng r(seed);
      return ops::softmax2_bce(wide.forward(xw, &r), yw).loss;
    };
    const long double base = wide_loss(point);
    auto f = [&](std::span<const double> w) { return static_cast<double>(wide_loss(w) - base); };
    const auto report = finite_diff_check(f, point, analytic, 1e-7, 64, seed);
    INFO("worst coordinate " << report.worst_coordinate << ": " << report.max_relative_error);
    CHECK(report.ok);
    CHECK(report.coordinates_checked >= 64);
    CHECK(report.max_relative_error < 1e-4);
  }

  TEST_CASE("end-to-end gradient, eval mode") {
    for (std::uint64_t seed : {1, 2}) full_model_check(false, seed);
  }

  TEST_CASE("end-to-end gradient with dropout") {
    full_model_check(true, 4);
  }

  TEST_CASE("every layer receives gradient") {
    NilmModel<double> m(ModelConfig{});
    std::mt19937_64 rng(9);
    const auto x = random_tensor(2, 1, 126, rng);
    const auto y = random_labels<double>(2, 3, 126, rng);
    m.zero_grad();
    m.loss_and_grad(x, y, nullptr);
    for (const auto& e : m.layout()->entries()) {
      if (e.name != "weight") continue;
      const auto g = m.grads().subspan(e.offset, e.size);
      INFO(e.layer_id);
      CHECK(std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; }));
    }
  }
}

TEST_SUITE("model behaviour") {
  TEST_CASE("zero output layer gives probability one half") {
    NilmModel<double> m(ModelConfig{});
    zero_output_layer(m);
    Tensor<double> x(2, 1, 126, 0.0);
    const auto logits = m.forward(x);
    const auto p = ops::on_probability(logits);
    CHECK(std::all_of(p.data().begin(), p.data().end(), [](double v) { return v == 0.5; }));
  }

  TEST_CASE("ties predict ON") {
    NilmModel<float> m(ModelConfig{});
    zero_output_layer(m);
    std::mt19937_64 rng(1);
    Tensor<float> x(2, 1, 126);
    std::uniform_real_distribution<float> d(-1, 1);
    for (float& v : x.data()) v = d(rng);
    const auto s = m.predict_states(x);
    CHECK(std::all_of(s.data().begin(), s.data().end(), [](float v) { return v == 1.0f; }));
  }

  TEST_CASE("shifting both logits of an appliance leaves predictions unchanged") {
    NilmModel<double> m(ModelConfig{});
    std::mt19937_64 rng(4);
    const auto x = random_tensor(3, 1, 126, rng);
    const auto before = m.predict_states(x);
    const ParamEntry& bias = m.layout()->find("decoder.out", "bias");
    for (std::size_t i = 0; i < 3; ++i) {
      const double c = 10.0 * (static_cast<double>(i) - 1.0) + 0.25;
      m.params()[bias.offset + 2 * i] += c;
      m.params()[bias.offset + 2 * i + 1] += c;
    }
    CHECK(m.predict_states(x).values() == before.values());
  }

  TEST_CASE("predict_states restores training mode") {
    NilmModel<float> m(ModelConfig{});
    m.set_training(true);
    Tensor<float> x(1, 1, 126, 0.0f);
    m.predict_states(x);
    CHECK(m.training());
  }

  TEST_CASE("training forward requires an rng when dropout is active") {
    NilmModel<float> m(ModelConfig{});
    m.set_training(true);
    Tensor<float> x(1, 1, 126, 0.0f);
    CHECK_THROWS_AS(m.forward(x), ParameterError);
  }

  TEST_CASE("overfits a single repeated batch within 50 steps") {
    ModelConfig c;
    c.init_seed = 3;
    NilmModel<float> m(c);
    m.set_training(true);
    std::mt19937_64 rng(21);
    Tensor<float> x(4, 1, 126);
    Tensor<float> y(4, 3, 126);
    // Blocks of 21 steps at +-1 with matching labels: learnable at the
    // network's coarse internal resolution.
    for (std::size_t b = 0; b < 4; ++b) {
      float on = 0;
      for (std::size_t l = 0; l < 126; ++l) {
        if (l % 21 == 0) on = static_cast<float>(rng() & 1u);
        x(b, 0, l) = 2 * on - 1;
        for (std::size_t a = 0; a < 3; ++a) y(b, a, l) = on;
      }
    }
    OptimizerState<float> opt(m.param_count(), 0.05f, 0.8f);
    Rng drop(1);
    float first = 0, last = 0;
    for (int step = 0; step < 50; ++step) {
      m.zero_grad();
      last = m.loss_and_grad(x, y, &drop);
      if (step == 0) first = last;
      sgd_momentum_step<float>(m.params(), m.grads(), opt);
    }
    INFO("initial " << first << " final " << last);
    CHECK(last < 0.1f * first);
  }
}
