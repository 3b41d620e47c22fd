#pragma once

#include "dem/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace dem {

enum class Activation { kIdentity, kRelu, kScaledTanh };

/// Elementwise max(0, x).
Matrix relu(const Eigen::Ref<const Matrix>& x);

/// Elementwise 1.7159 * tanh(2x/3).
Matrix scaled_tanh(const Eigen::Ref<const Matrix>& x);

Matrix apply_activation(Activation act, const Eigen::Ref<const Matrix>& pre);

/// Derivative of the activation, evaluated elementwise at the pre-activation.
/// The ReLU subgradient at exactly zero is taken as zero.
Matrix activation_grad(Activation act, const Eigen::Ref<const Matrix>& pre);

struct DenseLayer {
  Matrix weight;                // out_dim x in_dim
  std::optional<Matrix> bias;   // out_dim x 1; absent => contributes nothing
  Activation activation = Activation::kIdentity;

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

// Parallel linear branches summed into a fusion layer, an activation on the
// sum, and an optional output layer. Covers the one-layer, two-layer and
// multi-branch encoder shapes.
struct FeedForwardNet {
  std::vector<DenseLayer> branches;   // branch activations are ignored
  Activation fusion_activation = Activation::kRelu;
  std::optional<DenseLayer> output;

  Index fusion_dim() const {
    if (!branches.empty()) return branches[0].out_dim();
    return output ? output->in_dim() : 0;
  }
  Index out_dim() const { return output ? output->out_dim() : fusion_dim(); }
};

struct ForwardCache {
  std::vector<Matrix> inputs;   // one L_m x N matrix per branch
  Matrix fusion_pre;            // sum of branch outputs (M x N)
  Matrix fusion_out;
  Matrix output_pre;            // empty when the net has no output layer
  Matrix embedded;              // final D x N embedding
};

struct GradientSet {
  std::vector<Matrix> branch_weight;
  std::vector<Matrix> branch_bias;    // empty matrices when bias disabled
  Matrix output_weight;               // empty when no output layer
  Matrix output_bias;
  Matrix fusion_input_grad;           // dLoss/d(fusion_pre), M x N
};

enum class LossKind { kLeastSquare, kHinge };

struct LossSpec {
  LossKind kind = LossKind::kLeastSquare;
  Real lambda = 0.0;
  Real margin = 0.1;          // hinge only
  std::vector<int> labels;    // hinge only: prototype column per visual sample
};

/// Mean squared embedding error plus lambda times the squared Frobenius norm
/// of every weight matrix in params (biases are excluded by the caller).
Real embedding_loss(const Eigen::Ref<const Matrix>& embedded,
                    const Eigen::Ref<const Matrix>& visual,
                    std::span<const Matrix> params, Real lambda);

/// Ranking hinge: mean over samples of
///   sum_{wrong c} max(0, margin + d(phi, proto_label) - d(phi, proto_c))
/// with squared Euclidean d. One embedded prototype per column.
Real hinge_ranking_loss(const Eigen::Ref<const Matrix>& embedded_protos,
                        const Eigen::Ref<const Matrix>& visual,
                        std::span<const int> labels, Real margin);

/// Forward pass. extra_fusion_pre, when given, is added to the branch sum
/// (this is how an external encoder such as the BiLSTM contributes its
/// projection output). A net with no linear branches requires it.
ForwardCache forward(const FeedForwardNet& net, std::vector<Matrix> inputs,
                     const Matrix* extra_fusion_pre = nullptr);

/// Loss of a cached forward pass (data term plus the lambda penalty over the
/// net's weight matrices).
Real loss_value(const FeedForwardNet& net, const ForwardCache& cache,
                const Eigen::Ref<const Matrix>& visual, const LossSpec& spec);

/// Reverse-mode gradients of loss_value w.r.t. every parameter of the net.
GradientSet backward(const FeedForwardNet& net, const ForwardCache& cache,
                     const Eigen::Ref<const Matrix>& visual, const LossSpec& spec);

/// Central-difference probe of the analytic gradients. Checks every parameter
/// coordinate, or a seeded subsample of at least 200 for large nets. Returns
/// the maximum relative error.
Real grad_check(FeedForwardNet& net, const std::vector<Matrix>& inputs,
                const Eigen::Ref<const Matrix>& visual, const LossSpec& spec,
                Real step);

/// Flat list of pointers to the net's weight matrices (branches then output).
std::vector<const Matrix*> weight_matrices(const FeedForwardNet& net);

}  // namespace dem
