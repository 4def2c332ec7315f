#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace lta::ag {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A named trainable tensor. `id` is its position in the owning ParameterSet.
struct Parameter {
  std::string name;
  Matrix value;
  std::size_t id = 0;
};

class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  // nullptr when absent.
  Parameter* find(const std::string& name);

  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Gradient buffer indexed by Parameter::id; empty entries mean "no gradient".
using Gradients = std::vector<Matrix>;

Gradients zero_gradients(const ParameterSet& params);
void accumulate(Gradients& into, const Gradients& from, double scale = 1.0);

class Tape;

// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Reverse-mode recorder. Nodes are appended in evaluation order, which is a
// topological order, so backward() is a single reverse sweep.
class Tape {
 public:
  // With track_params == false parameters enter as constants (inference).
  explicit Tape(bool track_params = true) : track_params_(track_params) {}

  Var constant(Matrix value);
  // One node per parameter per tape; repeated calls return the same node.
  Var param(const Parameter& p);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node and accumulates parameter
  // gradients into `grads` (sized by zero_gradients()).
  void backward(const Var& loss, Gradients& grads);

  // Internal: used by the op implementations.
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    const Parameter* param = nullptr;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Matrix value, bool needs_grad,
           std::function<void(Tape&, std::size_t)> backward);
  Node& node(std::size_t i) { return nodes_[i]; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  bool needs_grad(const Var& v) const { return nodes_[v.index()].needs_grad; }

  // Adds `delta` to the gradient of node i (allocating on first use).
  template <typename Expr>
  void add_grad(std::size_t i, const Expr& delta) {
    Node& n = nodes_[i];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  bool track_params_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// --- ops --------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // broadcast 1xC over rows
Var transpose(const Var& a);
Var gelu(const Var& a);
Var exp(const Var& a);
Var clamp(const Var& a, double lo, double hi);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta,
               double eps = 1e-5);
Var softmax_rows(const Var& a);
Var mean_rows(const Var& a);  // RxC -> 1xC
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(const Var& table, std::span<const int> rows);
Var sum_all(const Var& a);  // -> 1x1

// Mean over rows of -w[t] * (1 - p_t)^gamma * log p_t with p = softmax(row).
Var weighted_cross_entropy(const Var& logits, std::span<const int> targets,
                           std::span<const double> class_weights,
                           double focal_gamma = 0.0);

// Mean of squared differences over all entries.
Var mse(const Var& a, const Var& b);

// KL(N(mean, diag exp(log_var)) || N(0, I)) for 1xW rows, summed over W.
Var kl_standard_normal(const Var& mean, const Var& log_var);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

// Exact-erf GELU and its derivative, shared with reference implementations.
double gelu_value(double x);
double gelu_grad(double x);

}  // namespace lta::ag
