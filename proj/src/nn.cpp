#include "dem/nn.hpp"

#include "dem/linalg.hpp"
#include "dem/rng.hpp"

#include <cmath>

namespace dem {
namespace {

constexpr Real kTanhScale = 1.7159;
constexpr Real kTanhSlope = 2.0 / 3.0;

Matrix branch_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.rows() != layer.in_dim()) {
    throw DimensionError("branch input has " + std::to_string(input.rows()) +
                         " rows, layer expects " + std::to_string(layer.in_dim()));
  }
  Matrix out = layer.weight * input;
  if (layer.bias) out.colwise() += layer.bias->col(0);
  return out;
}

}  // namespace

Matrix relu(const Eigen::Ref<const Matrix>& x) {
  return x.cwiseMax(0.0);
}

Matrix scaled_tanh(const Eigen::Ref<const Matrix>& x) {
  return kTanhScale * (kTanhSlope * x.array()).tanh().matrix();
}

Matrix apply_activation(Activation act, const Eigen::Ref<const Matrix>& pre) {
  switch (act) {
    case Activation::kIdentity: return pre;
    case Activation::kRelu: return relu(pre);
    case Activation::kScaledTanh: return scaled_tanh(pre);
  }
  throw ConfigError("unknown activation");
}

Matrix activation_grad(Activation act, const Eigen::Ref<const Matrix>& pre) {
  switch (act) {
    case Activation::kIdentity:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::kRelu:
      return (pre.array() > 0.0).cast<Real>().matrix();
    case Activation::kScaledTanh: {
      Eigen::ArrayXXd t = (kTanhSlope * pre.array()).tanh();
      return (kTanhScale * kTanhSlope * (1.0 - t.square())).matrix();
    }
  }
  throw ConfigError("unknown activation");
}

Real embedding_loss(const Eigen::Ref<const Matrix>& embedded,
                    const Eigen::Ref<const Matrix>& visual,
                    std::span<const Matrix> params, Real lambda) {
  if (embedded.rows() != visual.rows() || embedded.cols() != visual.cols()) {
    throw DimensionError("embedding_loss: embedded and visual shapes differ");
  }
  if (lambda < 0.0) {
    throw ConfigError("embedding_loss: negative lambda");
  }
  if (embedded.cols() == 0) {
    throw DimensionError("embedding_loss: no samples");
  }
  Real data = (visual - embedded).squaredNorm() / static_cast<Real>(embedded.cols());
  Real penalty = 0.0;
  for (const Matrix& p : params) penalty += p.squaredNorm();
  return data + lambda * penalty;
}

Real hinge_ranking_loss(const Eigen::Ref<const Matrix>& embedded_protos,
                        const Eigen::Ref<const Matrix>& visual,
                        std::span<const int> labels, Real margin) {
  if (margin <= 0.0) {
    throw ConfigError("hinge_ranking_loss: margin must be positive");
  }
  if (static_cast<Index>(labels.size()) != visual.cols()) {
    throw DimensionError("hinge_ranking_loss: one label per visual column required");
  }
  const Index num_classes = embedded_protos.cols();
  Real total = 0.0;
  for (Index i = 0; i < visual.cols(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= num_classes) {
      throw DimensionError("hinge_ranking_loss: label " + std::to_string(label) +
                           " out of range");
    }
    const Real d_correct = (visual.col(i) - embedded_protos.col(label)).squaredNorm();
    for (Index c = 0; c < num_classes; ++c) {
      if (c == label) continue;
      const Real d_wrong = (visual.col(i) - embedded_protos.col(c)).squaredNorm();
      const Real term = margin + d_correct - d_wrong;
      if (term > 0.0) total += term;
    }
  }
  return total / static_cast<Real>(visual.cols());
}

ForwardCache forward(const FeedForwardNet& net, std::vector<Matrix> inputs,
                     const Matrix* extra_fusion_pre) {
  if (net.branches.empty() && extra_fusion_pre == nullptr) {
    throw ConfigError("forward: net has no branches and no external contribution");
  }
  if (inputs.size() != net.branches.size()) {
    throw DimensionError("forward: expected " + std::to_string(net.branches.size()) +
                         " inputs, got " + std::to_string(inputs.size()));
  }
  ForwardCache cache;
  bool first = true;
  if (extra_fusion_pre != nullptr) {
    cache.fusion_pre = *extra_fusion_pre;
    first = false;
  }
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    Matrix contrib = branch_forward(net.branches[b], inputs[b]);
    if (first) {
      cache.fusion_pre = std::move(contrib);
      first = false;
    } else {
      if (contrib.rows() != cache.fusion_pre.rows() ||
          contrib.cols() != cache.fusion_pre.cols()) {
        throw DimensionError("forward: branch output shapes disagree");
      }
      cache.fusion_pre += contrib;
    }
  }
  cache.inputs = std::move(inputs);
  cache.fusion_out = apply_activation(net.fusion_activation, cache.fusion_pre);
  if (net.output) {
    cache.output_pre = branch_forward(*net.output, cache.fusion_out);
    cache.embedded = apply_activation(net.output->activation, cache.output_pre);
  } else {
    cache.embedded = cache.fusion_out;
  }
  return cache;
}

std::vector<const Matrix*> weight_matrices(const FeedForwardNet& net) {
  std::vector<const Matrix*> out;
  for (const auto& b : net.branches) out.push_back(&b.weight);
  if (net.output) out.push_back(&net.output->weight);
  return out;
}

namespace {

Real penalty_term(const FeedForwardNet& net, Real lambda) {
  Real p = 0.0;
  for (const Matrix* w : weight_matrices(net)) p += w->squaredNorm();
  return lambda * p;
}

// dLoss/d(embedded) for the data term of the selected loss.
Matrix embedded_grad(const Matrix& embedded, const Eigen::Ref<const Matrix>& visual,
                     const LossSpec& spec) {
  if (spec.kind == LossKind::kLeastSquare) {
    if (embedded.rows() != visual.rows() || embedded.cols() != visual.cols()) {
      throw DimensionError("backward: embedded and visual shapes differ");
    }
    return (2.0 / static_cast<Real>(embedded.cols())) * (embedded - visual);
  }
  // Hinge: embedded holds one prototype per class column.
  const Index num_classes = embedded.cols();
  const Index n = visual.cols();
  if (static_cast<Index>(spec.labels.size()) != n) {
    throw DimensionError("backward: hinge loss needs one label per visual sample");
  }
  Matrix grad = Matrix::Zero(embedded.rows(), num_classes);
  const Real inv_n = 1.0 / static_cast<Real>(n);
  for (Index i = 0; i < n; ++i) {
    const int label = spec.labels[i];
    if (label < 0 || label >= num_classes) {
      throw DimensionError("backward: hinge label out of range");
    }
    const Real d_correct = (visual.col(i) - embedded.col(label)).squaredNorm();
    for (Index c = 0; c < num_classes; ++c) {
      if (c == label) continue;
      const Real term = spec.margin + d_correct -
                        (visual.col(i) - embedded.col(c)).squaredNorm();
      if (term > 0.0) {
        // d/dp_label ||phi - p_label||^2 = 2 (p_label - phi); opposite sign for p_c.
        grad.col(label) += 2.0 * inv_n * (embedded.col(label) - visual.col(i));
        grad.col(c) -= 2.0 * inv_n * (embedded.col(c) - visual.col(i));
      }
    }
  }
  return grad;
}

}  // namespace

Real loss_value(const FeedForwardNet& net, const ForwardCache& cache,
                const Eigen::Ref<const Matrix>& visual, const LossSpec& spec) {
  if (spec.kind == LossKind::kLeastSquare) {
    std::vector<Matrix> params;
    for (const Matrix* w : weight_matrices(net)) params.push_back(*w);
    return embedding_loss(cache.embedded, visual, params, spec.lambda);
  }
  return hinge_ranking_loss(cache.embedded, visual, spec.labels, spec.margin) +
         penalty_term(net, spec.lambda);
}

GradientSet backward(const FeedForwardNet& net, const ForwardCache& cache,
                     const Eigen::Ref<const Matrix>& visual, const LossSpec& spec) {
  GradientSet grads;
  Matrix d_embedded = embedded_grad(cache.embedded, visual, spec);

  Matrix d_fusion_out;
  if (net.output) {
    const DenseLayer& out = *net.output;
    Matrix d_pre = d_embedded.cwiseProduct(activation_grad(out.activation, cache.output_pre));
    grads.output_weight = d_pre * cache.fusion_out.transpose() + 2.0 * spec.lambda * out.weight;
    if (out.bias) grads.output_bias = d_pre.rowwise().sum();
    d_fusion_out = out.weight.transpose() * d_pre;
  } else {
    d_fusion_out = std::move(d_embedded);
  }

  grads.fusion_input_grad =
      d_fusion_out.cwiseProduct(activation_grad(net.fusion_activation, cache.fusion_pre));

  grads.branch_weight.resize(net.branches.size());
  grads.branch_bias.resize(net.branches.size());
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    const DenseLayer& layer = net.branches[b];
    grads.branch_weight[b] = grads.fusion_input_grad * cache.inputs[b].transpose() +
                             2.0 * spec.lambda * layer.weight;
    if (layer.bias) grads.branch_bias[b] = grads.fusion_input_grad.rowwise().sum();
  }
  return grads;
}

Real grad_check(FeedForwardNet& net, const std::vector<Matrix>& inputs,
                const Eigen::Ref<const Matrix>& visual, const LossSpec& spec,
                Real step) {
  if (step <= 0.0) {
    throw ConfigError("grad_check: step must be positive");
  }
  ForwardCache cache = forward(net, inputs);
  GradientSet analytic = backward(net, cache, visual, spec);

  struct Slot {
    Matrix* param;
    const Matrix* grad;
  };
  std::vector<Slot> slots;
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    slots.push_back({&net.branches[b].weight, &analytic.branch_weight[b]});
  }
  if (net.output) {
    slots.push_back({&net.output->weight, &analytic.output_weight});
  }

  auto loss_at = [&]() {
    ForwardCache c = forward(net, inputs);
    return loss_value(net, c, visual, spec);
  };

  // Count coordinates; subsample when large.
  std::size_t total = 0;
  for (const auto& s : slots) total += static_cast<std::size_t>(s.param->size());
  for (const auto& b : net.branches)
    if (b.bias) total += static_cast<std::size_t>(b.bias->size());
  if (net.output && net.output->bias) total += static_cast<std::size_t>(net.output->bias->size());

  const bool subsample = total > 400;
  Rng rng(12345);
  const std::size_t probes = subsample ? 200 : total;

  Real max_rel = 0.0;
  auto probe_scalar = [&](Real* coord, Real analytic_g) {
    const Real saved = *coord;
    *coord = saved + step;
    const Real up = loss_at();
    *coord = saved - step;
    const Real down = loss_at();
    *coord = saved;
    const Real numeric = (up - down) / (2.0 * step);
    const Real denom = std::max({std::abs(analytic_g), std::abs(numeric), Real(1e-12)});
    max_rel = std::max(max_rel, std::abs(analytic_g - numeric) / denom);
  };

  if (!subsample) {
    for (const auto& s : slots) {
      for (Index i = 0; i < s.param->size(); ++i) {
        probe_scalar(s.param->data() + i, s.grad->data()[i]);
      }
    }
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
      if (!net.branches[b].bias) continue;
      Matrix& bias = *net.branches[b].bias;
      for (Index i = 0; i < bias.size(); ++i) {
        probe_scalar(bias.data() + i, analytic.branch_bias[b].data()[i]);
      }
    }
    if (net.output && net.output->bias) {
      Matrix& bias = *net.output->bias;
      for (Index i = 0; i < bias.size(); ++i) {
        probe_scalar(bias.data() + i, analytic.output_bias.data()[i]);
      }
    }
    return max_rel;
  }

  // Subsampled probe over the weight slots (biases are few; include them all).
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t slot_idx = rng.below(slots.size());
    auto& s = slots[slot_idx];
    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.param->size())));
    probe_scalar(s.param->data() + i, s.grad->data()[i]);
  }
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    if (!net.branches[b].bias) continue;
    Matrix& bias = *net.branches[b].bias;
    for (Index i = 0; i < bias.size(); ++i) {
      probe_scalar(bias.data() + i, analytic.branch_bias[b].data()[i]);
    }
  }
  if (net.output && net.output->bias) {
    Matrix& bias = *net.output->bias;
    for (Index i = 0; i < bias.size(); ++i) {
      probe_scalar(bias.data() + i, analytic.output_bias.data()[i]);
    }
  }
  return max_rel;
}

}  // namespace dem
