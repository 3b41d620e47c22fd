#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dem/nn.hpp"
#include "dem/rng.hpp"

#include <cmath>

using namespace dem;

namespace {

FeedForwardNet two_layer_net(int in, int hidden, int out, bool bias, Activation outer,
                             std::uint64_t seed) {
  Rng rng(seed);
  FeedForwardNet net;
  DenseLayer l1;
  l1.weight = rng.uniform_matrix(hidden, in, -0.7, 0.7);
  if (bias) l1.bias = rng.uniform_matrix(hidden, 1, -0.2, 0.2);
  net.branches.push_back(l1);
  net.fusion_activation = Activation::kRelu;
  DenseLayer l2;
  l2.weight = rng.uniform_matrix(out, hidden, -0.7, 0.7);
  if (bias) l2.bias = rng.uniform_matrix(out, 1, -0.2, 0.2);
  l2.activation = outer;
  net.output = l2;
  return net;
}

}  // namespace

TEST_CASE("relu clamps negatives") {
  Matrix x(1, 3);
  x << -1, 0, 2;
  Matrix y = relu(x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == 2.0);
  CHECK(relu(Matrix::Zero(3, 3)).isZero());

  Rng rng(5);
  Matrix pos = rng.uniform_matrix(4, 4, 0.0, 2.0);
  CHECK((relu(pos) - pos).norm() == 0.0);
}

TEST_CASE("scaled_tanh values") {
  Matrix zero = Matrix::Zero(1, 1);
  CHECK(scaled_tanh(zero)(0, 0) == 0.0);

  // oracle: 1.7159 * tanh(2*1.5/3) = 1.7159 * tanh(1)
  const Real expected = 1.7159 * std::tanh(1.0);
  Matrix x(1, 1);
  x << 1.5;
  CHECK(scaled_tanh(x)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(1.3068194122).epsilon(1e-9));

  Rng rng(13);
  Matrix big = rng.uniform_matrix(5, 5, -50.0, 50.0);
  CHECK((scaled_tanh(big).array().abs() < 1.7159).all());
}

TEST_CASE("embedding_loss examples") {
  Rng rng(17);
  Matrix v = rng.normal_matrix(3, 4);
  CHECK(embedding_loss(v, v, {}, 0.5) == doctest::Approx(0.0));

  Matrix w(2, 2);
  w << 1, 1, 1, 1;  // squared Frobenius norm 4
  std::vector<Matrix> params = {w};
  CHECK(embedding_loss(v, v, params, 0.5) == doctest::Approx(2.0));

  // N=2 with per-sample squared errors 1 and 3 -> mean 2
  Matrix embedded = Matrix::Zero(1, 2);
  Matrix visual(1, 2);
  visual << 1.0, std::sqrt(3.0);
  CHECK(embedding_loss(embedded, visual, {}, 0.0) == doctest::Approx(2.0));

  CHECK_THROWS_AS(embedding_loss(v, Matrix::Zero(3, 5), {}, 0.0), DimensionError);
  CHECK_THROWS_AS(embedding_loss(v, v, {}, -1.0), ConfigError);
}

TEST_CASE("embedding_loss column-permutation invariance and lower bound") {
  Rng rng(31);
  Matrix e = rng.normal_matrix(3, 6);
  Matrix v = rng.normal_matrix(3, 6);
  Matrix w = rng.normal_matrix(2, 2);
  std::vector<Matrix> params = {w};
  const Real base = embedding_loss(e, v, params, 0.3);

  auto perm = rng.permutation(6);
  Matrix ep(3, 6), vp(3, 6);
  for (int i = 0; i < 6; ++i) {
    ep.col(i) = e.col(perm[i]);
    vp.col(i) = v.col(perm[i]);
  }
  CHECK(embedding_loss(ep, vp, params, 0.3) == doctest::Approx(base).epsilon(1e-12));

  const Real penalty = 0.3 * w.squaredNorm();
  CHECK(base >= penalty);
  CHECK(embedding_loss(v, v, params, 0.3) == doctest::Approx(penalty));
}

TEST_CASE("hinge_ranking_loss examples") {
  // correct prototype at distance 0, wrong prototypes far: loss 0
  Matrix protos(2, 3);
  protos << 0, 10, -10, 0, 10, -10;
  Matrix visual(2, 1);
  visual << 0, 0;
  std::vector<int> labels = {0};
  CHECK(hinge_ranking_loss(protos, visual, labels, 0.1) == doctest::Approx(0.0));

  // one sample, one wrong class, equal distances -> margin survives
  Matrix p2(1, 2);
  p2 << 1, -1;
  Matrix v2(1, 1);
  v2 << 0;
  std::vector<int> l2 = {0};
  CHECK(hinge_ranking_loss(p2, v2, l2, 0.1) == doctest::Approx(0.1));

  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix p = rng.normal_matrix(3, 4);
    Matrix v = rng.normal_matrix(3, 5);
    std::vector<int> labs;
    for (int i = 0; i < 5; ++i) labs.push_back(static_cast<int>(rng.below(4)));
    CHECK(hinge_ranking_loss(p, v, labs, 0.2) >= 0.0);
  }

  std::vector<int> bad = {7};
  CHECK_THROWS_AS(hinge_ranking_loss(p2, v2, bad, 0.1), DimensionError);
}

TEST_CASE("backward zero input and target gives zero gradients") {
  FeedForwardNet net = two_layer_net(3, 4, 2, false, Activation::kRelu, 41);
  std::vector<Matrix> inputs = {Matrix::Zero(3, 5)};
  ForwardCache cache = forward(net, inputs);
  LossSpec spec;
  GradientSet g = backward(net, cache, Matrix::Zero(2, 5), spec);
  CHECK(g.branch_weight[0].isZero());
  CHECK(g.output_weight.isZero());
}

TEST_CASE("one-layer identity net matches the closed-form gradient") {
  // loss = (1/N) ||B - WA||_F^2 + lambda ||W||_F^2
  // dW   = (2/N) (WA - B) A^T + 2 lambda W
  Rng rng(43);
  FeedForwardNet net;
  DenseLayer l;
  l.weight = rng.normal_matrix(3, 4);
  net.branches.push_back(l);
  net.fusion_activation = Activation::kIdentity;

  Matrix a = rng.normal_matrix(4, 7);
  Matrix b = rng.normal_matrix(3, 7);
  const Real lambda = 0.05;
  LossSpec spec;
  spec.lambda = lambda;
  ForwardCache cache = forward(net, {a});
  GradientSet g = backward(net, cache, b, spec);

  Matrix expected = (2.0 / 7.0) * (net.branches[0].weight * a - b) * a.transpose() +
                    2.0 * lambda * net.branches[0].weight;
  CHECK((g.branch_weight[0] - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("grad_check: linear net is exact to first order") {
  FeedForwardNet net = two_layer_net(3, 4, 2, false, Activation::kIdentity, 47);
  net.fusion_activation = Activation::kIdentity;
  Rng rng(48);
  std::vector<Matrix> inputs = {rng.normal_matrix(3, 6)};
  Matrix visual = rng.normal_matrix(2, 6);
  LossSpec spec;
  spec.lambda = 0.01;
  CHECK(grad_check(net, inputs, visual, spec, 1e-5) < 1e-6);
}

TEST_CASE("grad_check: two-layer relu and fused scaled-tanh nets") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FeedForwardNet net = two_layer_net(3, 5, 4, true, Activation::kRelu, seed * 7);
    Rng rng(seed * 7 + 1);
    std::vector<Matrix> inputs = {rng.normal_matrix(3, 6)};
    Matrix visual = rng.uniform_matrix(4, 6, 0.0, 1.0);
    LossSpec spec;
    spec.lambda = 0.01;
    CHECK(grad_check(net, inputs, visual, spec, 1e-5) < 1e-4);

    // fused: two branches, scaled-tanh fusion
    FeedForwardNet fused = two_layer_net(3, 5, 4, false, Activation::kRelu, seed * 13);
    DenseLayer second;
    Rng rng2(seed * 13 + 5);
    second.weight = rng2.uniform_matrix(5, 2, -0.7, 0.7);
    fused.branches.push_back(second);
    fused.fusion_activation = Activation::kScaledTanh;
    std::vector<Matrix> fused_inputs = {rng2.normal_matrix(3, 6), rng2.normal_matrix(2, 6)};
    CHECK(grad_check(fused, fused_inputs, visual, spec, 1e-5) < 1e-4);
  }
}

TEST_CASE("grad_check: hinge loss away from the boundary") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FeedForwardNet net = two_layer_net(3, 5, 4, false, Activation::kRelu, seed * 17);
    Rng rng(seed * 17 + 2);
    std::vector<Matrix> inputs = {rng.normal_matrix(3, 4)};  // 4 classes
    Matrix visual = rng.normal_matrix(4, 6);
    LossSpec spec;
    spec.kind = LossKind::kHinge;
    spec.lambda = 0.01;
    spec.margin = 0.25;
    for (int i = 0; i < 6; ++i) spec.labels.push_back(static_cast<int>(rng.below(4)));

    // Skip configurations that put a sample exactly on the hinge boundary.
    ForwardCache cache = forward(net, inputs);
    bool near_boundary = false;
    for (Index i = 0; i < visual.cols(); ++i) {
      const Real d_correct =
          (visual.col(i) - cache.embedded.col(spec.labels[static_cast<std::size_t>(i)]))
              .squaredNorm();
      for (Index c = 0; c < cache.embedded.cols(); ++c) {
        if (c == spec.labels[static_cast<std::size_t>(i)]) continue;
        const Real term =
            spec.margin + d_correct - (visual.col(i) - cache.embedded.col(c)).squaredNorm();
        if (std::abs(term) < 1e-3) near_boundary = true;
      }
    }
    if (near_boundary) continue;
    CHECK(grad_check(net, inputs, visual, spec, 1e-5) < 1e-4);
  }
}
