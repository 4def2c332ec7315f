#include "lta/autograd.hpp"

#include <cmath>

#include "lta/error.hpp"

namespace lta::ag {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_tape(const Var& a, const Var& b) {
  require(a.tape() != nullptr && a.tape() == b.tape(),
          ErrorCode::kInvalidArgument, "vars from different tapes");
}

void check_shape(bool ok, const char* op) {
  require(ok, ErrorCode::kShapeMismatch, std::string("shape mismatch in ") + op);
}

}  // namespace

Parameter& ParameterSet::add(std::string name, Eigen::Index rows,
                             Eigen::Index cols) {
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Zero(rows, cols);
  p->id = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    g[i] = Matrix::Zero(params[i].value.rows(), params[i].value.cols());
  return g;
}

void accumulate(Gradients& into, const Gradients& from, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * from[i];
}

const Matrix& Var::value() const { return tape_->node(index_).value; }

Var Tape::push(Matrix value, bool needs_grad,
               std::function<void(Tape&, std::size_t)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Var v = push(p.value, track_params_, {});
  nodes_.back().param = &p;
  param_nodes_.emplace(&p, v.index());
  return v;
}

void Tape::backward(const Var& loss, Gradients& grads) {
  require(loss.tape() == this, ErrorCode::kInvalidArgument, "loss from another tape");
  require(loss.rows() == 1 && loss.cols() == 1, ErrorCode::kShapeMismatch,
          "backward needs a scalar loss");
  if (!nodes_[loss.index()].needs_grad) return;
  nodes_[loss.index()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      grads.at(n.param->id) += n.grad;
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

// --- ops --------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  Tape& t = *a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(a.value() * b.value(), t.needs_grad(a) || t.needs_grad(b),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  if (t.node(ia).needs_grad)
                    t.add_grad(ia, g * t.node(ib).value.transpose());
                  if (t.node(ib).needs_grad)
                    t.add_grad(ib, t.node(ia).value.transpose() * g);
                });
}

Var matmul_nt(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.cols() == b.cols(), "matmul_nt");
  Tape& t = *a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(a.value() * b.value().transpose(),
                t.needs_grad(a) || t.needs_grad(b),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  if (t.node(ia).needs_grad) t.add_grad(ia, g * t.node(ib).value);
                  if (t.node(ib).needs_grad)
                    t.add_grad(ib, g.transpose() * t.node(ia).value);
                });
}

Var add(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape& t = *a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(a.value() + b.value(), t.needs_grad(a) || t.needs_grad(b),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  t.add_grad(ia, g);
                  t.add_grad(ib, g);
                });
}

Var sub(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape& t = *a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(a.value() - b.value(), t.needs_grad(a) || t.needs_grad(b),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  t.add_grad(ia, g);
                  if (t.node(ib).needs_grad) t.add_grad(ib, -g);
                });
}

Var mul(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Tape& t = *a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(a.value().cwiseProduct(b.value()),
                t.needs_grad(a) || t.needs_grad(b),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  if (t.node(ia).needs_grad)
                    t.add_grad(ia, g.cwiseProduct(t.node(ib).value));
                  if (t.node(ib).needs_grad)
                    t.add_grad(ib, g.cwiseProduct(t.node(ia).value));
                });
}

Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  return t.push(a.value() * s, t.needs_grad(a), [ia, s](Tape& t, std::size_t self) {
    t.add_grad(ia, t.node(self).grad * s);
  });
}

Var add_row(const Var& a, const Var& row) {
  check_same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Tape& t = *a.tape();
  const std::size_t ia = a.index(), ir = row.index();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(row),
                [ia, ir](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  t.add_grad(ia, g);
                  if (t.node(ir).needs_grad) t.add_grad(ir, g.colwise().sum());
                });
}

Var transpose(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  return t.push(a.value().transpose(), t.needs_grad(a),
                [ia](Tape& t, std::size_t self) {
                  t.add_grad(ia, t.node(self).grad.transpose());
                });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Var gelu(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  return t.push(a.value().unaryExpr([](double x) { return gelu_value(x); }),
                t.needs_grad(a), [ia](Tape& t, std::size_t self) {
                  const Matrix& x = t.node(ia).value;
                  t.add_grad(ia, t.node(self).grad.cwiseProduct(
                                     x.unaryExpr([](double v) { return gelu_grad(v); })));
                });
}

Var exp(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  return t.push(a.value().array().exp().matrix(), t.needs_grad(a),
                [ia](Tape& t, std::size_t self) {
                  const Tape::Node& n = t.node(self);
                  t.add_grad(ia, n.grad.cwiseProduct(n.value));
                });
}

Var clamp(const Var& a, double lo, double hi) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  return t.push(a.value().cwiseMax(lo).cwiseMin(hi), t.needs_grad(a),
                [ia, lo, hi](Tape& t, std::size_t self) {
                  const Matrix& x = t.node(ia).value;
                  const Matrix mask = x.unaryExpr(
                      [lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
                  t.add_grad(ia, t.node(self).grad.cwiseProduct(mask));
                });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  check_same_tape(x, gamma);
  check_same_tape(x, beta);
  const Eigen::Index C = x.cols();
  check_shape(gamma.rows() == 1 && gamma.cols() == C && beta.rows() == 1 &&
                  beta.cols() == C,
              "layer_norm");
  Tape& t = *x.tape();
  const Matrix& X = x.value();
  Matrix xhat(X.rows(), C);
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).mean();
    const double var = (X.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const std::size_t ix = x.index(), ig = gamma.index(), ib = beta.index();
  return t.push(std::move(out),
                t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta),
                [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  if (t.node(ig).needs_grad)
                    t.add_grad(ig, g.cwiseProduct(xhat).colwise().sum());
                  if (t.node(ib).needs_grad) t.add_grad(ib, g.colwise().sum());
                  if (t.node(ix).needs_grad) {
                    Matrix gx = g;
                    gx.array().rowwise() *= t.node(ig).value.row(0).array();
                    Matrix dx(gx.rows(), gx.cols());
                    for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                      const double m1 = gx.row(r).mean();
                      const double m2 = gx.row(r).cwiseProduct(xhat.row(r)).mean();
                      dx.row(r) = inv_std(r) *
                                  (gx.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                    t.add_grad(ix, dx);
                  }
                });
}

Var softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  Matrix s = a.value();
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
  const std::size_t ia = a.index();
  return t.push(std::move(s), t.needs_grad(a), [ia](Tape& t, std::size_t self) {
    const Tape::Node& n = t.node(self);
    const Matrix& y = n.value;
    Matrix dx = n.grad.cwiseProduct(y);
    const Eigen::VectorXd dots = dx.rowwise().sum();
    dx -= (y.array().colwise() * dots.array()).matrix();
    t.add_grad(ia, dx);
  });
}

Var mean_rows(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  const Eigen::Index R = a.rows();
  return t.push(a.value().colwise().mean(), t.needs_grad(a),
                [ia, R](Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  t.add_grad(ia, g.replicate(R, 1) / static_cast<double>(R));
                });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows");
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  const Eigen::Index R = a.rows(), C = a.cols();
  return t.push(a.value().middleRows(start, count), t.needs_grad(a),
                [ia, start, count, R, C](Tape& t, std::size_t self) {
                  Matrix g = Matrix::Zero(R, C);
                  g.middleRows(start, count) = t.node(self).grad;
                  t.add_grad(ia, g);
                });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  const Eigen::Index R = a.rows(), C = a.cols();
  return t.push(a.value().middleCols(start, count), t.needs_grad(a),
                [ia, start, count, R, C](Tape& t, std::size_t self) {
                  Matrix g = Matrix::Zero(R, C);
                  g.middleCols(start, count) = t.node(self).grad;
                  t.add_grad(ia, g);
                });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_rows of nothing");
  Tape& t = *parts[0].tape();
  const Eigen::Index C = parts[0].cols();
  Eigen::Index R = 0;
  bool needs = false;
  std::vector<std::size_t> idx;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    check_same_tape(parts[0], p);
    check_shape(p.cols() == C, "concat_rows");
    offsets.push_back(R);
    idx.push_back(p.index());
    R += p.rows();
    needs = needs || t.needs_grad(p);
  }
  Matrix out(R, C);
  for (std::size_t k = 0; k < parts.size(); ++k)
    out.middleRows(offsets[k], parts[k].rows()) = parts[k].value();
  return t.push(std::move(out), needs,
                [idx = std::move(idx), offsets = std::move(offsets)](Tape& t,
                                                                     std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    if (!t.node(idx[k]).needs_grad) continue;
                    t.add_grad(idx[k],
                               g.middleRows(offsets[k], t.node(idx[k]).value.rows()));
                  }
                });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_cols of nothing");
  Tape& t = *parts[0].tape();
  const Eigen::Index R = parts[0].rows();
  Eigen::Index C = 0;
  bool needs = false;
  std::vector<std::size_t> idx;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    check_same_tape(parts[0], p);
    check_shape(p.rows() == R, "concat_cols");
    offsets.push_back(C);
    idx.push_back(p.index());
    C += p.cols();
    needs = needs || t.needs_grad(p);
  }
  Matrix out(R, C);
  for (std::size_t k = 0; k < parts.size(); ++k)
    out.middleCols(offsets[k], parts[k].cols()) = parts[k].value();
  return t.push(std::move(out), needs,
                [idx = std::move(idx), offsets = std::move(offsets)](Tape& t,
                                                                     std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    if (!t.node(idx[k]).needs_grad) continue;
                    t.add_grad(idx[k],
                               g.middleCols(offsets[k], t.node(idx[k]).value.cols()));
                  }
                });
}

Var gather_rows(const Var& table, std::span<const int> rows) {
  Tape& t = *table.tape();
  const Matrix& T = table.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), T.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] >= 0 && rows[r] < T.rows(), ErrorCode::kInvalidArgument,
            "gather index " + std::to_string(rows[r]) + " out of range");
    out.row(static_cast<Eigen::Index>(r)) = T.row(rows[r]);
  }
  const std::size_t it = table.index();
  return t.push(std::move(out), t.needs_grad(table),
                [it, rows = std::vector<int>(rows.begin(), rows.end())](
                    Tape& t, std::size_t self) {
                  const Matrix& g = t.node(self).grad;
                  const Matrix& table = t.node(it).value;
                  Matrix gt = Matrix::Zero(table.rows(), table.cols());
                  for (std::size_t r = 0; r < rows.size(); ++r)
                    gt.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
                  t.add_grad(it, gt);
                });
}

Var sum_all(const Var& a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.index();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index R = a.rows(), C = a.cols();
  return t.push(std::move(out), t.needs_grad(a), [ia, R, C](Tape& t, std::size_t self) {
    t.add_grad(ia, Matrix::Constant(R, C, t.node(self).grad(0, 0)));
  });
}

Var weighted_cross_entropy(const Var& logits, std::span<const int> targets,
                           std::span<const double> class_weights,
                           double focal_gamma) {
  const Eigen::Index R = logits.rows(), C = logits.cols();
  check_shape(static_cast<Eigen::Index>(targets.size()) == R, "weighted_cross_entropy");
  check_shape(class_weights.empty() ||
                  static_cast<Eigen::Index>(class_weights.size()) == C,
              "weighted_cross_entropy weights");
  Tape& t = *logits.tape();
  const Matrix& Z = logits.value();
  Matrix probs(R, C);
  Matrix dlogits(R, C);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < R; ++r) {
    const int target = targets[r];
    require(target >= 0 && target < C, ErrorCode::kInvalidArgument,
            "target class " + std::to_string(target) + " out of range");
    const double m = Z.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (Z.row(r).array() - m).exp();
    const double denom = e.sum();
    probs.row(r) = e / denom;
    const double log_p = Z(r, target) - m - std::log(denom);
    const double p = probs(r, target);
    const double w = class_weights.empty() ? 1.0 : class_weights[target];

    double modulator = 1.0;
    double coef = 1.0;  // d(loss_r)/d(logit_j) = -w * coef * (delta_tj - p_j)
    if (focal_gamma != 0.0) {
      const double q = std::max(0.0, 1.0 - p);
      modulator = std::pow(q, focal_gamma);
      const double dmod = q > 0.0 ? focal_gamma * std::pow(q, focal_gamma - 1.0) : 0.0;
      coef = modulator - dmod * p * log_p;
    }
    loss += -w * modulator * log_p;
    Eigen::RowVectorXd delta = -probs.row(r);
    delta(target) += 1.0;
    dlogits.row(r) = -w * coef * delta / static_cast<double>(R);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(R);
  const std::size_t il = logits.index();
  return t.push(std::move(out), t.needs_grad(logits),
                [il, dlogits = std::move(dlogits)](Tape& t, std::size_t self) {
                  t.add_grad(il, dlogits * t.node(self).grad(0, 0));
                });
}

Var mse(const Var& a, const Var& b) {
  check_same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mse");
  Tape& t = *a.tape();
  const Matrix diff = a.value() - b.value();
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  const std::size_t ia = a.index(), ib = b.index();
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [ia, ib, diff, n](Tape& t, std::size_t self) {
                  const double g = t.node(self).grad(0, 0);
                  if (t.node(ia).needs_grad) t.add_grad(ia, diff * (2.0 * g / n));
                  if (t.node(ib).needs_grad) t.add_grad(ib, diff * (-2.0 * g / n));
                });
}

Var kl_standard_normal(const Var& mean, const Var& log_var) {
  check_same_tape(mean, log_var);
  check_shape(mean.rows() == log_var.rows() && mean.cols() == log_var.cols(),
              "kl_standard_normal");
  Tape& t = *mean.tape();
  const Matrix& mu = mean.value();
  const Matrix& lv = log_var.value();
  Matrix out(1, 1);
  out(0, 0) = 0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array()).sum();
  const std::size_t im = mean.index(), il = log_var.index();
  return t.push(std::move(out), t.needs_grad(mean) || t.needs_grad(log_var),
                [im, il](Tape& t, std::size_t self) {
                  const double g = t.node(self).grad(0, 0);
                  if (t.node(im).needs_grad) t.add_grad(im, t.node(im).value * g);
                  if (t.node(il).needs_grad)
                    t.add_grad(il, ((t.node(il).value.array().exp() - 1.0) * 0.5 * g).matrix());
                });
}

}  // namespace lta::ag
