#include "dem/text.hpp"

#include "dem/rng.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

namespace dem {
namespace {

Vector sigmoid(const Vector& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Vector concat(const Vector& x, const Vector& h) {
  Vector xh(x.size() + h.size());
  xh << x, h;
  return xh;
}

LstmStep lstm_step(const LstmCell& cell, const Vector& x, const Vector& h_prev,
                   const Vector& c_prev, Vector* h_out) {
  LstmStep step;
  step.x = x;
  step.h_prev = h_prev;
  step.c_prev = c_prev;
  const Vector xh = concat(x, h_prev);
  step.gate_i = sigmoid(cell.w_input * xh + cell.b_input.col(0));
  step.gate_f = sigmoid(cell.w_forget * xh + cell.b_forget.col(0));
  step.gate_o = sigmoid(cell.w_output * xh + cell.b_output.col(0));
  step.gate_g = (cell.w_cell * xh + cell.b_cell.col(0)).array().tanh().matrix();
  step.c = step.gate_f.cwiseProduct(c_prev) + step.gate_i.cwiseProduct(step.gate_g);
  step.tanh_c = step.c.array().tanh().matrix();
  *h_out = step.gate_o.cwiseProduct(step.tanh_c);
  return step;
}

// Backward through one step. dh/dc are the incoming gradients; on return they
// hold the gradients for the previous step. dx receives dLoss/dx.
void lstm_step_backward(const LstmCell& cell, const LstmStep& step, Vector& dh, Vector& dc,
                        Vector* dx, Matrix dw[4], Matrix db[4]) {
  const Vector d_o = dh.cwiseProduct(step.tanh_c);
  dc += dh.cwiseProduct(step.gate_o)
            .cwiseProduct((1.0 - step.tanh_c.array().square()).matrix());

  const Vector dz_o = d_o.cwiseProduct(step.gate_o)
                          .cwiseProduct((1.0 - step.gate_o.array()).matrix());
  const Vector dz_i = dc.cwiseProduct(step.gate_g)
                          .cwiseProduct(step.gate_i)
                          .cwiseProduct((1.0 - step.gate_i.array()).matrix());
  const Vector dz_f = dc.cwiseProduct(step.c_prev)
                          .cwiseProduct(step.gate_f)
                          .cwiseProduct((1.0 - step.gate_f.array()).matrix());
  const Vector dz_g = dc.cwiseProduct(step.gate_i)
                          .cwiseProduct((1.0 - step.gate_g.array().square()).matrix());

  const Vector xh = concat(step.x, step.h_prev);
  dw[0] += dz_i * xh.transpose();
  dw[1] += dz_f * xh.transpose();
  dw[2] += dz_o * xh.transpose();
  dw[3] += dz_g * xh.transpose();
  db[0] += dz_i;
  db[1] += dz_f;
  db[2] += dz_o;
  db[3] += dz_g;

  const Vector dxh = cell.w_input.transpose() * dz_i + cell.w_forget.transpose() * dz_f +
                     cell.w_output.transpose() * dz_o + cell.w_cell.transpose() * dz_g;
  const Index in_dim = step.x.size();
  *dx = dxh.head(in_dim);
  dh = dxh.tail(step.h_prev.size());
  dc = dc.cwiseProduct(step.gate_f);
}

}  // namespace

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  index_["<pad>"] = kPad;
  index_["<unk>"] = kUnknown;
}

int Vocabulary::add(const std::string& token) {
  const auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = idx;
  return idx;
}

int Vocabulary::lookup(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  Vocabulary vocab;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == kPad || line_no == kUnknown) {
      // Reserved rows; accept whatever marker the file uses.
    } else if (line.empty()) {
      throw IoError(path + ":" + std::to_string(line_no + 1) + ": empty token");
    } else {
      vocab.add(line);
    }
    ++line_no;
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  for (const auto& token : tokens_) out << token << "\n";
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  Vocabulary vocab;
  for (const auto& text : texts) {
    for (const auto& token : tokenize(text)) vocab.add(token);
  }
  return vocab;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

TokenSequence tokenize_pad(const std::string& text, const Vocabulary& vocab, int max_len) {
  if (max_len <= 0) throw ConfigError("tokenize_pad: max_len must be positive");
  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), Vocabulary::kPad);
  const auto tokens = tokenize(text);
  seq.true_length = std::min<int>(max_len, static_cast<int>(tokens.size()));
  for (int i = 0; i < seq.true_length; ++i) {
    seq.ids[static_cast<std::size_t>(i)] = vocab.lookup(tokens[static_cast<std::size_t>(i)]);
  }
  return seq;
}

LstmCell make_lstm_cell(int input_dim, int hidden_dim, Rng& rng) {
  const int total = input_dim + hidden_dim;
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(total));
  LstmCell cell;
  cell.w_input = rng.uniform_matrix(hidden_dim, total, -bound, bound);
  cell.w_forget = rng.uniform_matrix(hidden_dim, total, -bound, bound);
  cell.w_output = rng.uniform_matrix(hidden_dim, total, -bound, bound);
  cell.w_cell = rng.uniform_matrix(hidden_dim, total, -bound, bound);
  cell.b_input = Matrix::Zero(hidden_dim, 1);
  cell.b_forget = Matrix::Ones(hidden_dim, 1);
  cell.b_output = Matrix::Zero(hidden_dim, 1);
  cell.b_cell = Matrix::Zero(hidden_dim, 1);
  return cell;
}

BiLstmEncoder make_bilstm_encoder(int vocab_size, int embed_dim, int hidden_dim,
                                  int unit_dim, int max_len, Rng& rng) {
  BiLstmEncoder enc;
  const Real embed_bound = 1.0 / std::sqrt(static_cast<Real>(embed_dim));
  enc.embedding = rng.uniform_matrix(vocab_size, embed_dim, -embed_bound, embed_bound);
  enc.embedding.row(Vocabulary::kPad).setZero();
  enc.forward_cell = make_lstm_cell(embed_dim, hidden_dim, rng);
  enc.backward_cell = make_lstm_cell(embed_dim, hidden_dim, rng);
  const Real proj_bound = 1.0 / std::sqrt(static_cast<Real>(hidden_dim));
  enc.proj_forward = rng.uniform_matrix(unit_dim, hidden_dim, -proj_bound, proj_bound);
  enc.proj_backward = rng.uniform_matrix(unit_dim, hidden_dim, -proj_bound, proj_bound);
  enc.max_len = max_len;
  return enc;
}

EncodeCache bilstm_forward(const BiLstmEncoder& enc, const TokenSequence& seq) {
  if (seq.true_length > static_cast<int>(seq.ids.size())) {
    throw DimensionError("bilstm_forward: true_length exceeds sequence length");
  }
  const Index hidden = enc.hidden_dim();
  EncodeCache cache;
  cache.seq = seq;

  Vector h = Vector::Zero(hidden);
  Vector c = Vector::Zero(hidden);
  for (int t = 0; t < seq.true_length; ++t) {
    const int token = seq.ids[static_cast<std::size_t>(t)];
    LstmStep step = lstm_step(enc.forward_cell, enc.embedding.row(token).transpose(), h, c, &h);
    step.token = token;
    c = step.c;
    cache.fwd_steps.push_back(std::move(step));
  }
  cache.h_forward = h;

  h.setZero();
  c.setZero();
  for (int t = seq.true_length - 1; t >= 0; --t) {
    const int token = seq.ids[static_cast<std::size_t>(t)];
    LstmStep step = lstm_step(enc.backward_cell, enc.embedding.row(token).transpose(), h, c, &h);
    step.token = token;
    c = step.c;
    cache.bwd_steps.push_back(std::move(step));
  }
  cache.h_backward = h;

  cache.unit_pre = enc.proj_forward * cache.h_forward + enc.proj_backward * cache.h_backward;
  return cache;
}

Vector bilstm_encode(const BiLstmEncoder& enc, const TokenSequence& seq, Activation act) {
  const EncodeCache cache = bilstm_forward(enc, seq);
  return apply_activation(act, cache.unit_pre);
}

void TextGradients::init_like(const BiLstmEncoder& enc) {
  d_embedding = Matrix::Zero(enc.embedding.rows(), enc.embedding.cols());
  const LstmCell* cells[2] = {&enc.forward_cell, &enc.backward_cell};
  for (int side = 0; side < 2; ++side) {
    const LstmCell& cell = *cells[side];
    for (int g = 0; g < 4; ++g) {
      d_w[side * 4 + g] = Matrix::Zero(cell.w_input.rows(), cell.w_input.cols());
      d_b[side * 4 + g] = Matrix::Zero(cell.b_input.rows(), 1);
    }
  }
  d_proj_forward = Matrix::Zero(enc.proj_forward.rows(), enc.proj_forward.cols());
  d_proj_backward = Matrix::Zero(enc.proj_backward.rows(), enc.proj_backward.cols());
}

void TextGradients::accumulate(const TextGradients& other) {
  d_embedding += other.d_embedding;
  for (int i = 0; i < 8; ++i) {
    d_w[i] += other.d_w[i];
    d_b[i] += other.d_b[i];
  }
  d_proj_forward += other.d_proj_forward;
  d_proj_backward += other.d_proj_backward;
}

std::vector<Matrix*> TextGradients::params_of(BiLstmEncoder& enc) const {
  std::vector<Matrix*> params = {&enc.embedding};
  LstmCell* cells[2] = {&enc.forward_cell, &enc.backward_cell};
  for (auto* cell : cells) {
    params.push_back(&cell->w_input);
    params.push_back(&cell->w_forget);
    params.push_back(&cell->w_output);
    params.push_back(&cell->w_cell);
    params.push_back(&cell->b_input);
    params.push_back(&cell->b_forget);
    params.push_back(&cell->b_output);
    params.push_back(&cell->b_cell);
  }
  params.push_back(&enc.proj_forward);
  params.push_back(&enc.proj_backward);
  return params;
}

TextGradients bilstm_backward(const BiLstmEncoder& enc, const EncodeCache& cache,
                              const Eigen::Ref<const Vector>& upstream) {
  if (cache.fwd_steps.size() != cache.bwd_steps.size()) {
    throw NumericError("bilstm_backward: inconsistent forward cache");
  }
  if (upstream.size() != enc.unit_dim()) {
    throw DimensionError("bilstm_backward: upstream gradient has wrong size");
  }
  TextGradients grads;
  grads.init_like(enc);
  if (cache.fwd_steps.empty()) return grads;  // zero-length: everything stays zero

  grads.d_proj_forward = upstream * cache.h_forward.transpose();
  grads.d_proj_backward = upstream * cache.h_backward.transpose();

  // Forward direction, steps run t = true_length-1 .. 0.
  Vector dh = enc.proj_forward.transpose() * upstream;
  Vector dc = Vector::Zero(enc.hidden_dim());
  for (int t = static_cast<int>(cache.fwd_steps.size()) - 1; t >= 0; --t) {
    const LstmStep& step = cache.fwd_steps[static_cast<std::size_t>(t)];
    Vector dx;
    lstm_step_backward(enc.forward_cell, step, dh, dc, &dx, grads.d_w, grads.d_b);
    grads.d_embedding.row(step.token) += dx.transpose();
  }

  dh = enc.proj_backward.transpose() * upstream;
  dc.setZero();
  for (int t = static_cast<int>(cache.bwd_steps.size()) - 1; t >= 0; --t) {
    const LstmStep& step = cache.bwd_steps[static_cast<std::size_t>(t)];
    Vector dx;
    lstm_step_backward(enc.backward_cell, step, dh, dc, &dx, grads.d_w + 4, grads.d_b + 4);
    grads.d_embedding.row(step.token) += dx.transpose();
  }
  return grads;
}

Matrix average_prototypes(const BiLstmEncoder& enc, Activation act, const Vocabulary& vocab,
                          const std::vector<std::vector<std::string>>& descriptions_per_class) {
  Matrix out(enc.unit_dim(), static_cast<Index>(descriptions_per_class.size()));
  for (std::size_t c = 0; c < descriptions_per_class.size(); ++c) {
    const auto& texts = descriptions_per_class[c];
    if (texts.empty()) {
      throw DimensionError("average_prototypes: class " + std::to_string(c) +
                           " has no descriptions");
    }
    Vector acc = Vector::Zero(enc.unit_dim());
    for (const auto& text : texts) {
      acc += bilstm_encode(enc, tokenize_pad(text, vocab, enc.max_len), act);
    }
    out.col(static_cast<Index>(c)) = acc / static_cast<Real>(texts.size());
  }
  return out;
}

}  // namespace dem
