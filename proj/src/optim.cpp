#include "lta/optim.hpp"

#include <cmath>

namespace lta {

Adam::Adam(const ag::ParameterSet& params, AdamOptions options)
    : options_(options), counts_(params.size(), 0) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(ag::Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(m_.back());
  }
}

void Adam::step(ag::ParameterSet& params, const ag::Gradients& grads,
                const std::vector<bool>& trainable) {
  ++steps_;
  auto active = [&](std::size_t i) { return trainable.empty() || trainable[i]; };

  double scale = 1.0;
  if (options_.grad_clip > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (active(i)) sq += grads[i].squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > options_.grad_clip) scale = options_.grad_clip / norm;
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active(i)) continue;
    const long t = ++counts_[i];
    const ag::Matrix g = grads[i] * scale;
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t));
    params[i].value.array() -=
        options_.learning_rate * (m_[i].array() / c1) /
        ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
}

}  // namespace lta
