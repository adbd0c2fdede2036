#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "drivatt/errors.hpp"
#include "drivatt/nn/autograd.hpp"
#include "drivatt/nn/optim.hpp"
#include "oracles.hpp"

using namespace drivatt;
using namespace drivatt::nn;

namespace {

// Compares backward() against central differences for every input.
void check_gradients(const std::vector<Var>& inputs, const std::function<Var()>& f, double tol = 1e-6) {
  for (const Var& v : inputs) v->zero_grad();
  backward(f());
  for (const Var& v : inputs) {
    const Tensor analytic = v->grad.empty() ? Tensor(v->value.shape()) : v->grad;
    for (std::size_t i = 0; i < v->value.size(); ++i) {
      const double keep = v->value[i];
      const double h = 1e-6;
      v->value[i] = keep + h;
      const double up = f()->value.item();
      v->value[i] = keep - h;
      const double down = f()->value.item();
      v->value[i] = keep;
      const double numeric = (up - down) / (2 * h);
      CHECK(std::abs(numeric - analytic[i]) <= tol * std::max(1.0, std::abs(numeric)));
    }
  }
}

// Reduces a tensor-valued node to a scalar with fixed random weights.
Var weighted_sum(const Var& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = testing::random_tensor(x->value.shape(), rng);
  Tensor target = softmax(w);
  return softmax_cross_entropy(x, target);
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("conv2d matches the naive oracle") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const int ci = 1 + trial % 3, co = 1 + trial % 4, k = trial % 2 ? 3 : 1;
      const int stride = 1 + trial % 2, pad = k / 2 + trial % 2;
      const Tensor x = testing::random_tensor({ci, 7 + trial % 3, 9}, rng);
      const Tensor w = testing::random_tensor({co, ci, k, k}, rng);
      const Tensor b = testing::random_tensor({co}, rng);
      CHECK(testing::max_abs_diff(conv2d(x, w, &b, stride, pad), testing::naive_conv2d(x, w, &b, stride, pad)) <
            1e-12);
    }
  }

  TEST_CASE("conv2d rejects mismatched channels") {
    CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), nullptr, 1, 1), ShapeMismatch);
  }

  TEST_CASE("softmax sums to one and is shift invariant") {
    std::mt19937_64 rng(2);
    Tensor x = testing::random_tensor({1, 4, 6}, rng, 30.0);
    const Tensor s = softmax(x);
    double sum = 0;
    for (double v : s.data()) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (double& v : x.data()) v += 1000.0;
    CHECK(testing::max_abs_diff(softmax(x), s) < 1e-12);
  }

  TEST_CASE("gradients of every op match finite differences") {
    std::mt19937_64 rng(3);
    const Var x = parameter(testing::random_tensor({2, 5, 6}, rng));
    const Var w = parameter(testing::random_tensor({3, 2, 3, 3}, rng, 0.5));
    const Var b = parameter(testing::random_tensor({3}, rng));
    const Var y = parameter(testing::random_tensor({2, 5, 6}, rng));
    const Var coeffs = parameter(testing::random_tensor({4}, rng));
    const Var stack = parameter(testing::random_tensor({4, 2, 5, 6}, rng));
    const Var mat = parameter(testing::random_tensor({3, 4}, rng));
    const Var vec = parameter(testing::random_tensor({4}, rng));
    const Var mb = parameter(testing::random_tensor({3}, rng));

    SUBCASE("conv2d strided") {
      check_gradients({x, w, b}, [&] { return weighted_sum(conv2d(x, w, b, 2, 1), 10); });
    }
    SUBCASE("conv2d same") {
      check_gradients({x, w, b}, [&] { return weighted_sum(conv2d(x, w, b, 1, 1), 11); });
    }
    SUBCASE("add and scale") {
      check_gradients({x, y}, [&] { return weighted_sum(add(scale(x, -1.7), y), 12); });
    }
    SUBCASE("relu, tanh, sigmoid") {
      check_gradients({x}, [&] { return weighted_sum(relu(x), 13); });
      check_gradients({x}, [&] { return weighted_sum(tanh(x), 14); });
      check_gradients({x}, [&] { return weighted_sum(sigmoid(x), 15); });
    }
    SUBCASE("concat") {
      check_gradients({x, y}, [&] { return weighted_sum(concat_channels(x, y), 16); });
    }
    SUBCASE("mix") {
      check_gradients({coeffs, stack}, [&] { return weighted_sum(mix(coeffs, stack), 17); });
    }
    SUBCASE("affine") {
      check_gradients({mat, vec, mb}, [&] { return weighted_sum(affine(mat, vec, mb), 18); });
    }
    SUBCASE("shared subexpression accumulates") {
      check_gradients({x}, [&] { return weighted_sum(add(x, tanh(x)), 19); });
    }
  }

  TEST_CASE("no-grad guard records nothing") {
    const Var x = parameter(Tensor({3}, 1.0));
    {
      NoGradGuard g;
      CHECK_FALSE(grad_enabled());
      const Var y = scale(x, 2.0);
      CHECK(y->parents.empty());
    }
    CHECK(grad_enabled());
  }

  TEST_CASE("dropout zeroes at the given rate and rescales") {
    std::mt19937_64 rng(4);
    const Var x = constant(Tensor({1, 100, 100}, 1.0));
    const Var y = dropout(x, 0.7, rng);
    int zeros = 0;
    for (double v : y->value.data()) {
      if (v == 0.0)
        ++zeros;
      else
        CHECK(v == doctest::Approx(1.0 / 0.3));
    }
    CHECK(zeros / 10000.0 == doctest::Approx(0.7).epsilon(0.03));
  }

  TEST_CASE("one Adam step matches the closed form") {
    ParameterSet ps;
    const Var theta = ps.add("theta", Tensor({1}, 0.5));
    AdamConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.weight_decay = 1e-4;
    Adam opt(ps, cfg);
    // Gradient of 1.5 * theta^2 at theta = 0.5.
    theta->grad_buffer()[0] = 3 * 0.5;
    opt.step();
    const double g = 1.5 + 1e-4 * 0.5;
    const double m = (1 - 0.9) * g, v = (1 - 0.999) * g * g;
    const double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
    const double expected = 0.5 - 1e-4 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(std::abs(theta->value[0] - expected) <= 1e-10);
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("second Adam step uses bias-corrected moments") {
    ParameterSet ps;
    const Var theta = ps.add("theta", Tensor({1}, 1.0));
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.0;
    Adam opt(ps, cfg);
    double m = 0, v = 0, t = 1.0;
    for (int k = 1; k <= 2; ++k) {
      const double g = 2 * t;
      theta->zero_grad();
      theta->grad_buffer()[0] = g;
      opt.step();
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      t -= 0.1 * (m / (1 - std::pow(0.9, k))) / (std::sqrt(v / (1 - std::pow(0.999, k))) + 1e-8);
      CHECK(std::abs(theta->value[0] - t) <= 1e-12);
    }
  }

  TEST_CASE("zero learning rate is a bitwise no-op") {
    std::mt19937_64 rng(5);
    ParameterSet ps;
    const Var a = ps.add("a", testing::random_tensor({3, 3}, rng));
    const Tensor before = a->value;
    AdamConfig cfg;
    cfg.learning_rate = 0.0;
    Adam opt(ps, cfg);
    a->grad_buffer().fill(0.3);
    opt.step();
    CHECK(a->value == before);
  }

  TEST_CASE("parameter set lookup") {
    ParameterSet ps;
    ps.add("a", Tensor({2, 2}));
    ps.add("b", Tensor({3}));
    CHECK(ps.scalar_count() == 7);
    CHECK(ps.find("b"));
    CHECK_FALSE(ps.find("c"));
    CHECK_THROWS(ps.add("a", Tensor({1})));
  }
}
