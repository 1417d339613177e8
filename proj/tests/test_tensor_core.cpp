#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fednilm/gradcheck.hpp"
#include "fednilm/layers.hpp"
#include "fednilm/params.hpp"
#include "test_support.hpp"

using namespace fednilm;
using fednilm::testing::check_input_gradient;
using fednilm::testing::random_tensor;
using fednilm::testing::random_vector;

namespace {

Tensor<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>(1, 1, n, std::move(v));
}

std::vector<double> values(const Tensor<double>& t) { return t.values(); }

}  // namespace

TEST_SUITE("conv1d") {
  TEST_CASE("identity kernel") {
    Tensor<double> w(1, 1, 1, std::vector<double>{1.0});
    const std::vector<double> bias{0.0};
    auto y = ops::conv1d(row({1, 2, 3}), w, std::span<const double>(bias), 0);
    CHECK(values(y) == std::vector<double>{1, 2, 3});
  }

  TEST_CASE("centered delta with zero padding") {
    Tensor<double> w(1, 1, 3, std::vector<double>{0, 1, 0});
    const std::vector<double> bias{0.0};
    auto y = ops::conv1d(row({1, 2, 3}), w, std::span<const double>(bias), 1);
    CHECK(values(y) == std::vector<double>{1, 2, 3});
  }

  TEST_CASE("cross-correlation against direct sum") {
    std::mt19937_64 rng(3);
    const auto x = random_tensor(2, 3, 9, rng);
    const auto w = random_tensor(4, 3, 5, rng);
    const auto bias = random_vector(4, rng);
    const auto y = ops::conv1d(x, w, std::span<const double>(bias), 2);
    REQUIRE(y.length() == 9);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t co = 0; co < 4; ++co)
        for (std::size_t t = 0; t < 9; ++t) {
          double acc = bias[co];
          for (std::size_t ci = 0; ci < 3; ++ci)
            for (std::size_t k = 0; k < 5; ++k) {
              const long j = static_cast<long>(t + k) - 2;
              if (j >= 0 && j < 9) acc += w(co, ci, k) * x(b, ci, j);
            }
          CHECK(y(b, co, t) == doctest::Approx(acc).epsilon(1e-12));
        }
  }

  TEST_CASE("shape errors name the axis") {
    Tensor<double> w(2, 3, 3);
    const std::vector<double> bias(2, 0.0);
    try {
      ops::conv1d(Tensor<double>(1, 2, 5), w, std::span<const double>(bias), 1);
      FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
      CHECK(e.axis() == "channels");
    }
    Tensor<double> even(2, 3, 2);
    CHECK_THROWS_AS(ops::conv1d(Tensor<double>(1, 3, 5), even, std::span<const double>(bias), 0),
                    ParameterError);
    CHECK_THROWS_AS(ops::conv1d(Tensor<double>(1, 3, 1), Tensor<double>(2, 3, 5),
                                std::span<const double>(bias), 0),
                    DimensionError);
  }

  TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> dim(1, 4);
      const std::size_t batch = dim(rng), cin = dim(rng), cout = dim(rng);
      const std::size_t len = 3 + dim(rng);
      const std::size_t kernel = seed % 2 == 0 ? 3 : 1;
      const ops::ConvGeometry g{cin, cout, kernel, kernel / 2};
      const auto x = random_tensor(batch, cin, len, rng);
      auto w = random_vector(g.weight_size(), rng);
      auto bias = random_vector(cout, rng);
      const auto y = ops::conv1d<double>(x, w, bias, g);
      const auto r = random_tensor(y.batch(), y.channels(), y.length(), rng);

      Tensor<double> dx;
      std::vector<double> dw(w.size(), 0.0), db(cout, 0.0);
      ops::conv1d_backward<double>(x, w, g, r, &dx, dw, db);

      auto wrt_x = [&](std::span<const double> v) {
        Tensor<double> xx(batch, cin, len, std::vector<double>(v.begin(), v.end()));
        return testing::dot(ops::conv1d<double>(xx, w, bias, g).data(), r.data());
      };
      auto wrt_w = [&](std::span<const double> v) {
        return testing::dot(ops::conv1d<double>(x, v, bias, g).data(), r.data());
      };
      auto wrt_b = [&](std::span<const double> v) {
        return testing::dot(ops::conv1d<double>(x, w, v, g).data(), r.data());
      };
      CHECK(finite_diff_check(wrt_x, x.data(), dx.data()).max_relative_error < 1e-5);
      CHECK(finite_diff_check(wrt_w, w, dw).max_relative_error < 1e-5);
      CHECK(finite_diff_check(wrt_b, bias, db).max_relative_error < 1e-5);
    }
  }

  TEST_CASE("linear in the input when bias is zero") {
    std::mt19937_64 rng(11);
    const ops::ConvGeometry g{3, 5, 3, 1};
    const auto w = random_vector(g.weight_size(), rng);
    const std::vector<double> bias(5, 0.0);
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = random_tensor(2, 3, 17, rng);
      const auto z = random_tensor(2, 3, 17, rng);
      const double a = 1.7, b = -0.3;
      Tensor<double> mix(2, 3, 17);
      for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = a * x.data()[i] + b * z.data()[i];
      const auto lhs = ops::conv1d<double>(mix, w, bias, g);
      const auto cx = ops::conv1d<double>(x, w, bias, g);
      const auto cz = ops::conv1d<double>(z, w, bias, g);
      for (std::size_t i = 0; i < lhs.size(); ++i) {
        CHECK(std::abs(lhs.data()[i] - (a * cx.data()[i] + b * cz.data()[i])) < 1e-10);
      }
    }
  }
}

TEST_SUITE("upsample_conv1d") {
  TEST_CASE("matches upsample, crop, conv composition") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(100 + seed);
      const std::size_t factor = 1 + seed % 5;
      const std::size_t in_len = 2 + seed % 4;
      const std::size_t cropped = in_len * factor - (seed % factor);
      const ops::ConvGeometry g{3, 2, seed % 3 == 0 ? 1u : 3u, seed % 3 == 0 ? 0u : 1u};
      const auto x = random_tensor(2, 3, in_len, rng);
      const auto w = random_vector(g.weight_size(), rng);
      const auto bias = random_vector(2, rng);

      const auto reference = ops::conv1d<double>(
          ops::crop_length(ops::upsample_nearest(x, factor), cropped), w, bias, g);
      const auto fused = ops::upsample_conv1d<double>(x, factor, cropped, w, bias, g);
      REQUIRE(fused.same_shape(reference));
      for (std::size_t i = 0; i < fused.size(); ++i) {
        CHECK(std::abs(fused.data()[i] - reference.data()[i]) < 1e-12);
      }

      const auto r = random_tensor(fused.batch(), fused.channels(), fused.length(), rng);
      Tensor<double> dx;
      std::vector<double> dw(w.size(), 0.0), db(2, 0.0);
      ops::upsample_conv1d_backward<double>(x, factor, cropped, w, g, r, &dx, dw, db);
      auto wrt_x = [&](std::span<const double> v) {
        Tensor<double> xx(2, 3, in_len, std::vector<double>(v.begin(), v.end()));
        return testing::dot(ops::upsample_conv1d<double>(xx, factor, cropped, w, bias, g).data(),
                            r.data());
      };
      auto wrt_w = [&](std::span<const double> v) {
        return testing::dot(ops::upsample_conv1d<double>(x, factor, cropped, v, bias, g).data(),
                            r.data());
      };
      auto wrt_b = [&](std::span<const double> v) {
        return testing::dot(ops::upsample_conv1d<double>(x, factor, cropped, w, v, g).data(),
                            r.data());
      };
      CHECK(finite_diff_check(wrt_x, x.data(), dx.data()).max_relative_error < 1e-5);
      CHECK(finite_diff_check(wrt_w, w, dw).max_relative_error < 1e-5);
      CHECK(finite_diff_check(wrt_b, bias, db).max_relative_error < 1e-5);
    }
  }
}

TEST_SUITE("avg_pool1d") {
  TEST_CASE("examples") {
    CHECK(values(ops::avg_pool1d(row({1, 2, 3, 4}), 2, 2)) == std::vector<double>{1.5, 3.5});
    CHECK(values(ops::avg_pool1d(row({1, 2, 3}), 2, 2)) == std::vector<double>{1.5, 3.0});
    CHECK(values(ops::avg_pool1d(row({4, -1, 7}), 1, 1)) == std::vector<double>{4, -1, 7});
    // Window wider than the signal pools all of it.
    CHECK(values(ops::avg_pool1d(row({1, 2, 3}), 5, 5)) == std::vector<double>{2.0});
  }

  TEST_CASE("partial windows match a brute-force mean") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> len_dist(1, 40), sz(1, 9);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t len = len_dist(rng), size = sz(rng), stride = sz(rng);
      const auto x = random_tensor(1, 1, len, rng);
      const auto y = ops::avg_pool1d(x, size, stride);
      // Brute force: every window start that lands inside the signal.
      std::vector<double> expected;
      if (size >= len) {
        double s = 0;
        for (std::size_t i = 0; i < len; ++i) s += x(0, 0, i);
        expected.push_back(s / static_cast<double>(len));
      } else {
        for (std::size_t start = 0; start < len; start += stride) {
          double s = 0;
          std::size_t n = 0;
          for (std::size_t i = start; i < std::min(start + size, len); ++i, ++n) s += x(0, 0, i);
          expected.push_back(s / static_cast<double>(n));
          if (start + size >= len) break;
        }
      }
      REQUIRE(y.length() == expected.size());
      for (std::size_t j = 0; j < expected.size(); ++j) {
        CHECK(y(0, 0, j) == doctest::Approx(expected[j]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      const std::size_t len = 5 + seed, size = 1 + seed % 4, stride = 1 + (seed / 2) % 4;
      const auto x = random_tensor(2, 2, len, rng);
      auto report = check_input_gradient(
          x, [&](const Tensor<double>& v) { return ops::avg_pool1d(v, size, stride); },
          [&](const Tensor<double>&, const Tensor<double>& dy) {
            return ops::avg_pool1d_backward(dy, len, size, stride);
          },
          rng);
      CHECK(report.max_relative_error < 1e-5);
    }
  }

  TEST_CASE("pool then upsample is a projection") {
    std::mt19937_64 rng(9);
    for (std::size_t factor = 1; factor <= 6; ++factor) {
      const std::size_t len = factor * 7;
      const auto x = random_tensor(2, 3, len, rng);
      auto project = [&](const Tensor<double>& v) {
        return ops::upsample_nearest(ops::avg_pool1d(v, factor, factor), factor);
      };
      const auto once = project(x);
      const auto twice = project(once);
      for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(twice.data()[i] == doctest::Approx(once.data()[i]).epsilon(1e-14));
      }
    }
  }
}

TEST_SUITE("upsample_nearest") {
  TEST_CASE("examples") {
    CHECK(values(ops::upsample_nearest(row({1, 2}), 3)) == std::vector<double>{1, 1, 1, 2, 2, 2});
    CHECK(values(ops::upsample_nearest(row({1, 2}), 1)) == std::vector<double>{1, 2});
    const auto g = ops::upsample_nearest_backward(row({1, 2, 3, 4, 5, 6}), 3);
    CHECK(values(g) == std::vector<double>{6, 15});
    CHECK_THROWS_AS(ops::upsample_nearest(row({1}), 0), ParameterError);
  }

  TEST_CASE("gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      const std::size_t factor = 1 + seed % 4;
      const auto x = random_tensor(1 + seed % 2, 2, 3 + seed, rng);
      auto report = check_input_gradient(
          x, [&](const Tensor<double>& v) { return ops::upsample_nearest(v, factor); },
          [&](const Tensor<double>&, const Tensor<double>& dy) {
            return ops::upsample_nearest_backward(dy, factor);
          },
          rng);
      CHECK(report.max_relative_error < 1e-5);
    }
  }
}

TEST_SUITE("concat_channels") {
  TEST_CASE("examples and round trip") {
    Tensor<double> a(1, 2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor<double> b(1, 1, 3, std::vector<double>{7, 8, 9});
    std::vector<const Tensor<double>*> parts{&a, &b};
    const auto y = ops::concat_channels<double>(parts);
    CHECK(y.channels() == 3);
    CHECK(values(y) == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});

    std::vector<const Tensor<double>*> single{&a};
    CHECK(values(ops::concat_channels<double>(single)) == values(a));

    const std::vector<std::size_t> counts{2, 1};
    const auto back = ops::split_channels<double>(y, counts);
    CHECK(values(back[0]) == values(a));
    CHECK(values(back[1]) == values(b));
  }

  TEST_CASE("length mismatch") {
    Tensor<double> a(1, 1, 3), b(1, 1, 4);
    std::vector<const Tensor<double>*> parts{&a, &b};
    try {
      ops::concat_channels<double>(parts);
      FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
      CHECK(e.axis() == "length");
    }
  }
}

TEST_SUITE("relu and dropout") {
  TEST_CASE("relu") {
    const auto y = ops::relu(row({-1, 0, 2}));
    CHECK(values(y) == std::vector<double>{0, 0, 2});
    CHECK(values(ops::relu_backward(y, row({5, 5, 5}))) == std::vector<double>{0, 0, 5});
  }

  TEST_CASE("relu gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      const auto x = random_tensor(2, 3, 8, rng);
      auto report = check_input_gradient(
          x, [](const Tensor<double>& v) { return ops::relu(v); },
          [](const Tensor<double>& v, const Tensor<double>& dy) {
            return ops::relu_backward(ops::relu(v), dy);
          },
          rng);
      CHECK(report.max_relative_error < 1e-5);
    }
  }

  TEST_CASE("dropout") {
    std::mt19937_64 data_rng(1);
    const auto x = random_tensor(2, 4, 50, data_rng);
    Rng rng(7);
    CHECK(values(ops::dropout(x, 0.0, rng, true).output) == values(x));
    CHECK(values(ops::dropout(x, 0.5, rng, false).output) == values(x));

    Rng r1(42), r2(42);
    const auto a = ops::dropout(x, 0.5, r1, true);
    const auto b = ops::dropout(x, 0.5, r2, true);
    CHECK(a.mask == b.mask);
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (a.mask[i] == 0.0) {
        ++dropped;
        CHECK(a.output.data()[i] == 0.0);
      } else {
        CHECK(a.output.data()[i] == doctest::Approx(2.0 * x.data()[i]));
      }
    }
    CHECK(dropped > 0);
    CHECK(dropped < x.size());
    CHECK_THROWS_AS(ops::dropout(x, 1.0, rng, true), ParameterError);
  }
}

TEST_SUITE("softmax2_bce") {
  TEST_CASE("uniform logits give ln 2 per term") {
    Tensor<double> logits(2, 4, 5, 0.0);
    Tensor<double> labels(2, 2, 5, 1.0);
    const auto r = ops::softmax2_bce(logits, labels);
    // Averaged over batch and steps, summed over the two appliances.
    CHECK(r.loss == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-15));

    Tensor<double> one(1, 2, 1, 0.0), lab(1, 1, 1, 1.0);
    CHECK(ops::softmax2_bce(one, lab).loss == doctest::Approx(0.6931).epsilon(1e-4));
  }

  TEST_CASE("saturated correct logits") {
    Tensor<double> logits(1, 2, 2, std::vector<double>{-20, 20, 20, -20});
    Tensor<double> labels(1, 1, 2, std::vector<double>{1, 0});
    const auto r = ops::softmax2_bce(logits, labels);
    CHECK(r.loss >= 0.0);
    CHECK(r.loss < 1e-6);
  }

  TEST_CASE("non-binary labels are rejected") {
    Tensor<double> logits(1, 2, 2), labels(1, 1, 2, std::vector<double>{1, 0.5});
    CHECK_THROWS_AS(ops::softmax2_bce(logits, labels), ValidationError);
  }

  TEST_CASE("gradient and non-negativity") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      const std::size_t batch = 1 + seed % 3, apps = 1 + seed % 3, len = 4 + seed;
      const auto logits = random_tensor(batch, 2 * apps, len, rng, -4.0, 4.0);
      Tensor<double> labels(batch, apps, len);
      std::bernoulli_distribution coin(0.5);
      for (double& v : labels.data()) v = coin(rng) ? 1.0 : 0.0;
      const auto r = ops::softmax2_bce(logits, labels);
      CHECK(r.loss >= 0.0);
      auto f = [&](std::span<const double> v) {
        Tensor<double> l(batch, 2 * apps, len, std::vector<double>(v.begin(), v.end()));
        return ops::softmax2_bce(l, labels).loss;
      };
      CHECK(finite_diff_check(f, logits.data(), r.grad_logits.data()).max_relative_error < 1e-5);
    }
  }
}

TEST_SUITE("sgd_momentum_step") {
  TEST_CASE("single step") {
    std::vector<double> w{1.0};
    const std::vector<double> d{2.0};
    OptimizerState<double> st(1, 0.1, 0.5);
    sgd_momentum_step<double>(w, d, st);
    CHECK(st.velocity[0] == doctest::Approx(2.0));
    CHECK(w[0] == doctest::Approx(0.8));
    sgd_momentum_step<double>(w, d, st);
    CHECK(st.velocity[0] == doctest::Approx(3.0));
    CHECK(w[0] == doctest::Approx(0.5));
  }

  TEST_CASE("zero momentum is plain SGD, bit-exactly") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      auto w = random_vector(257, rng);
      const auto d = random_vector(257, rng);
      const double eta = 0.037 * (trial + 1);
      OptimizerState<double> st(w.size(), eta, 0.0);
      // Warm the velocity so the rho = 0 path must ignore it.
      st.velocity = random_vector(257, rng);
      auto expected = w;
      for (std::size_t i = 0; i < w.size(); ++i) expected[i] = w[i] - eta * d[i];
      sgd_momentum_step<double>(w, d, st);
      CHECK(w == expected);
    }
  }

  TEST_CASE("length mismatch and bad hyperparameters") {
    std::vector<double> w(3), d(2);
    OptimizerState<double> st(3, 0.1, 0.5);
    CHECK_THROWS_AS(sgd_momentum_step<double>(w, d, st), StructuralError);
    CHECK_THROWS_AS(OptimizerState<double>(3, -0.1, 0.5), ParameterError);
    CHECK_NOTHROW(OptimizerState<double>(3, 0.0, 0.5));
    CHECK_THROWS_AS(OptimizerState<double>(3, 0.1, 1.0), ParameterError);
  }
}

TEST_SUITE("finite_diff_check") {
  TEST_CASE("square") {
    const std::vector<double> point{3.0}, analytic{6.0};
    auto f = [](std::span<const double> w) { return w[0] * w[0]; };
    const auto r = finite_diff_check(f, point, analytic);
    CHECK(r.ok);
    CHECK(r.max_relative_error < 1e-6);
  }

  TEST_CASE("constant") {
    const std::vector<double> point{1.0, -2.0}, analytic{0.0, 0.0};
    auto f = [](std::span<const double>) { return 4.0; };
    CHECK(finite_diff_check(f, point, analytic).max_relative_error == 0.0);
  }

  TEST_CASE("non-finite function is reported") {
    const std::vector<double> point{1.0}, analytic{0.0};
    auto f = [](std::span<const double>) { return std::nan(""); };
    const auto r = finite_diff_check(f, point, analytic);
    CHECK_FALSE(r.ok);
    CHECK_FALSE(r.failure.empty());
  }

  TEST_CASE("random coordinate subset") {
    std::vector<double> point(500, 1.0), analytic(500, 2.0);
    auto f = [](std::span<const double> w) {
      double s = 0;
      for (double v : w) s += v * v;
      return s;
    };
    const auto r = finite_diff_check(f, point, analytic, 1e-5, 64, 1);
    CHECK(r.coordinates_checked == 64);
    CHECK(r.max_relative_error < 1e-8);
  }
}
