#include "dem/optim.hpp"

#include <cmath>

namespace dem {
namespace {

void check_shapes(const std::vector<Matrix*>& params,
                  const std::vector<const Matrix*>& grads,
                  std::vector<Matrix>& accum, const char* who) {
  if (params.size() != grads.size()) {
    throw DimensionError(std::string(who) + ": parameter/gradient count mismatch");
  }
  if (accum.empty()) {
    for (const Matrix* p : params) accum.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  if (accum.size() != params.size()) {
    throw DimensionError(std::string(who) + ": state tracks a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols() ||
        params[i]->rows() != accum[i].rows() || params[i]->cols() != accum[i].cols()) {
      throw DimensionError(std::string(who) + ": shape mismatch at parameter " +
                           std::to_string(i));
    }
  }
}

}  // namespace

void AdamState::step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads) {
  check_shapes(params, grads, m_, "adam_step");
  if (v_.empty()) {
    for (const Matrix* p : params) v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  ++t_;
  const Real b1 = config_.beta1, b2 = config_.beta2;
  const Real corr1 = 1.0 - std::pow(b1, static_cast<Real>(t_));
  const Real corr2 = 1.0 - std::pow(b2, static_cast<Real>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    const auto m_hat = m_[i].array() / corr1;
    const auto v_hat = v_[i].array() / corr2;
    params[i]->array() -= config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
  }
}

void RmsPropState::step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads) {
  check_shapes(params, grads, ms_, "rmsprop_step");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    ms_[i] = config_.decay * ms_[i] + (1.0 - config_.decay) * g.cwiseProduct(g);
    params[i]->array() -=
        config_.learning_rate * g.array() / (ms_[i].array().sqrt() + config_.epsilon);
  }
}

void clip_gradients(std::vector<Matrix*> grads, Real max_norm) {
  if (max_norm <= 0.0) {
    throw ConfigError("clip_gradients: max_norm must be positive");
  }
  Real sq = 0.0;
  for (const Matrix* g : grads) sq += g->squaredNorm();
  const Real norm = std::sqrt(sq);
  if (norm > max_norm) {
    const Real scale = max_norm / norm;
    for (Matrix* g : grads) *g *= scale;
  }
}

}  // namespace dem
