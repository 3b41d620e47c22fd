#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dem/optim.hpp"
#include "dem/rng.hpp"

#include <cmath>

using namespace dem;

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  AdamState state(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  Matrix p = Matrix::Ones(2, 2);
  Matrix saved = p;
  Matrix g = Matrix::Zero(2, 2);
  state.step({&p}, {&g});
  CHECK((p - saved).norm() == 0.0);
  CHECK(state.step_count() == 1);
}

TEST_CASE("adam: first step moves by about -lr * sign(g)") {
  AdamState state(AdamConfig{0.01, 0.9, 0.999, 1e-8});
  Rng rng(3);
  Matrix p = Matrix::Zero(3, 3);
  Matrix g = rng.normal_matrix(3, 3);
  state.step({&p}, {&g});
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) {
      CHECK(std::abs(p(i, j)) <= 0.01 * (1.0 + 1e-6));
      if (std::abs(g(i, j)) > 1e-6) {
        CHECK(p(i, j) * g(i, j) < 0.0);  // moved against the gradient
        CHECK(std::abs(p(i, j)) == doctest::Approx(0.01).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("adam: 3-step trajectory on f(w)=w^2 matches the scalar oracle") {
  // independent scalar oracle, plain doubles
  double w = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double expected[3];
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * w;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);
    expected[t - 1] = w;
  }

  AdamState state(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  Matrix p(1, 1);
  p << 1.0;
  for (int t = 0; t < 3; ++t) {
    Matrix g = 2.0 * p;
    state.step({&p}, {&g});
    CHECK(p(0, 0) == doctest::Approx(expected[t]).epsilon(1e-12));
  }
}

TEST_CASE("rmsprop: zero gradient leaves parameters unchanged") {
  RmsPropState state(RmsPropConfig{0.1, 0.9, 1e-8});
  Matrix p = Matrix::Ones(2, 1);
  Matrix saved = p;
  Matrix g = Matrix::Zero(2, 1);
  state.step({&p}, {&g});
  CHECK((p - saved).norm() == 0.0);
}

TEST_CASE("rmsprop: constant gradient converges to lr-sized steps") {
  RmsPropState state(RmsPropConfig{0.05, 0.9, 1e-8});
  Matrix p = Matrix::Zero(1, 1);
  Matrix g(1, 1);
  g << 3.0;
  double prev = 0.0;
  for (int t = 0; t < 400; ++t) {
    prev = p(0, 0);
    state.step({&p}, {&g});
  }
  // update magnitude -> lr * g / (sqrt(g^2) + eps) ~= lr
  CHECK(std::abs(p(0, 0) - prev) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("rmsprop: 3-step scalar trajectory matches the oracle") {
  double w = 1.0, ms = 0.0;
  const double lr = 0.1, decay = 0.9, eps = 1e-8;
  double expected[3];
  for (int t = 0; t < 3; ++t) {
    const double g = 2.0 * w;
    ms = decay * ms + (1 - decay) * g * g;
    w -= lr * g / (std::sqrt(ms) + eps);
    expected[t] = w;
  }
  RmsPropState state(RmsPropConfig{0.1, 0.9, 1e-8});
  Matrix p(1, 1);
  p << 1.0;
  for (int t = 0; t < 3; ++t) {
    Matrix g = 2.0 * p;
    state.step({&p}, {&g});
    CHECK(p(0, 0) == doctest::Approx(expected[t]).epsilon(1e-12));
  }
}

TEST_CASE("optimizers reject shape mismatches") {
  AdamState adam;
  Matrix p = Matrix::Zero(2, 2);
  Matrix g = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(adam.step({&p}, {&g}), DimensionError);
}

TEST_CASE("clip_gradients examples and post-clip bound") {
  Matrix g(1, 2);
  g << 3, 4;  // norm 5
  Matrix g_copy = g;
  clip_gradients({&g_copy}, 5.5);
  CHECK((g_copy - g).norm() == 0.0);

  clip_gradients({&g}, 2.5);
  CHECK(g(0, 0) == doctest::Approx(1.5));
  CHECK(g(0, 1) == doctest::Approx(2.0));

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = rng.normal_matrix(3, 3);
    Matrix b = rng.normal_matrix(2, 5);
    const Real max_norm = rng.uniform(0.1, 4.0);
    clip_gradients({&a, &b}, max_norm);
    const Real norm = std::sqrt(a.squaredNorm() + b.squaredNorm());
    CHECK(norm <= max_norm + 1e-12);
  }

  CHECK_THROWS_AS(clip_gradients({&g}, 0.0), ConfigError);
}
