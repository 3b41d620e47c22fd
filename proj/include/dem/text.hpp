#pragma once

#include "dem/nn.hpp"
#include "dem/types.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace dem {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  Vocabulary();

  /// Adds a token if not present; returns its index.
  int add(const std::string& token);

  /// Index of a token; kUnknown when absent.
  int lookup(const std::string& token) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }

  /// One token per line, line number = index.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  /// Builds a vocabulary over every token appearing in the given texts.
  static Vocabulary build(const std::vector<std::string>& texts);

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
};

/// Lowercase alphanumeric tokens; everything else separates.
std::vector<std::string> tokenize(const std::string& text);

struct TokenSequence {
  std::vector<int> ids;   // length = max_len, zero-padded
  int true_length = 0;
};

/// Tokenizes, truncates to max_len, pads with index 0.
TokenSequence tokenize_pad(const std::string& text, const Vocabulary& vocab, int max_len);

struct LstmCell {
  // Each gate block maps the concatenated [x; h_prev] (hidden x (input+hidden)).
  Matrix w_input, w_forget, w_output, w_cell;
  Matrix b_input, b_forget, b_output, b_cell;   // hidden x 1

  Index hidden_dim() const { return w_input.rows(); }
  Index input_dim() const { return w_input.cols() - w_input.rows(); }
};

/// Forget-gate bias starts at 1, the rest at 0; weights uniform in
/// +-1/sqrt(input+hidden).
LstmCell make_lstm_cell(int input_dim, int hidden_dim, class Rng& rng);

struct BiLstmEncoder {
  Matrix embedding;           // vocab x embed_dim, row per token
  LstmCell forward_cell;
  LstmCell backward_cell;
  Matrix proj_forward;        // M x hidden
  Matrix proj_backward;       // M x hidden
  int max_len = 30;

  Index unit_dim() const { return proj_forward.rows(); }
  Index hidden_dim() const { return forward_cell.hidden_dim(); }
  Index embed_dim() const { return embedding.cols(); }
};

BiLstmEncoder make_bilstm_encoder(int vocab_size, int embed_dim, int hidden_dim,
                                  int unit_dim, int max_len, class Rng& rng);

struct LstmStep {
  Vector x, h_prev, c_prev;
  Vector gate_i, gate_f, gate_o, gate_g;
  Vector c, tanh_c;
  int token = 0;
};

struct EncodeCache {
  TokenSequence seq;
  std::vector<LstmStep> fwd_steps;   // tokens 1..true_length
  std::vector<LstmStep> bwd_steps;   // tokens true_length..1
  Vector h_forward, h_backward;      // final hidden states
  Vector unit_pre;                   // proj_f h-> + proj_b h<-
};

/// Runs both directions over the non-padding prefix; padding positions are
/// never read. true_length 0 yields a zero unit_pre.
EncodeCache bilstm_forward(const BiLstmEncoder& enc, const TokenSequence& seq);

/// Eq-style encoding: activation applied to the projected final states.
Vector bilstm_encode(const BiLstmEncoder& enc, const TokenSequence& seq, Activation act);

struct TextGradients {
  Matrix d_embedding;                 // vocab x embed_dim (rows touched only)
  Matrix d_w[8];                      // fwd {i,f,o,g}, then bwd {i,f,o,g}
  Matrix d_b[8];
  Matrix d_proj_forward, d_proj_backward;

  void init_like(const BiLstmEncoder& enc);
  void accumulate(const TextGradients& other);
  std::vector<Matrix*> params_of(BiLstmEncoder& enc) const;
};

/// Backprop-through-time for one cached sequence; upstream is dLoss/d(unit_pre).
TextGradients bilstm_backward(const BiLstmEncoder& enc, const EncodeCache& cache,
                              const Eigen::Ref<const Vector>& upstream);

/// Encodes every description and arithmetic-means them within each class.
/// Returns one unit-space column per class, ordered as `classes`.
Matrix average_prototypes(const BiLstmEncoder& enc, Activation act, const Vocabulary& vocab,
                          const std::vector<std::vector<std::string>>& descriptions_per_class);

}  // namespace dem
