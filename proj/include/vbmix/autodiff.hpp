// Copyright 2026 The vbmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VBMIX__AUTODIFF_HPP_
#define VBMIX__AUTODIFF_HPP_

// Matrix-valued reverse-mode automatic differentiation.
//
// Every value on the tape is a dense Eigen matrix whose rows are batch items
// and whose columns are features. Nodes are appended in evaluation order, so
// the reverse sweep is a single pass over node ids in descending order.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

namespace vbmix::ad
{

using Matrix = Eigen::MatrixXd;

/// A named trainable tensor together with its gradient accumulator.
struct Parameter
{
  std::string name;
  Matrix value;
};

/// Owns all trainable parameters of a model. Indices are stable for the
/// store's lifetime and are the handles the network modules keep.
class ParamStore
{
public:
  std::size_t add(std::string name, Matrix init);

  std::size_t size() const { return params_.size(); }
  Parameter & operator[](std::size_t i) { return params_[i]; }
  const Parameter & operator[](std::size_t i) const { return params_[i]; }
  std::vector<Parameter> & all() { return params_; }
  const std::vector<Parameter> & all() const { return params_; }

  /// Throws if the name is unknown.
  std::size_t index_of(const std::string & name) const;
  bool contains(const std::string & name) const { return index_.count(name) > 0; }

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;
  std::size_t scalar_count(const std::string & prefix) const;

  /// Zero-filled gradient buffers shaped like every parameter.
  std::vector<Matrix> zeros_like() const;

private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Lightweight handle to a node on a tape.
struct Var
{
  Tape * tape = nullptr;
  int id = -1;

  const Matrix & value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape
{
public:
  /// When `record` is false no backward closures are kept; the tape is a
  /// plain evaluator and parameters are treated as constants.
  explicit Tape(const ParamStore & params, bool record = true);

  Tape(const Tape &) = delete;
  Tape & operator=(const Tape &) = delete;

  bool recording() const { return record_; }
  const ParamStore & params() const { return *params_; }

  Var constant(Matrix m);
  Var constant(double x);
  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var param(std::size_t index);

  const Matrix & value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and sweeps backwards.
  void backward(Var root);

  /// Adds the parameter gradients of the last backward pass into `grads`.
  void accumulate_param_grads(std::vector<Matrix> & grads) const;

  /// Gradient of the last backward pass with respect to a node.
  const Matrix & grad(int id) const { return nodes_[id].grad; }

  // Used by op implementations.
  using Backward = std::function<void(Tape &, int)>;
  Var push(Matrix value, std::initializer_list<int> inputs, Backward backward);
  void accum(int id, const Matrix & g);
  template <typename Expr>
  void accum_expr(int id, const Expr & g)
  {
    Node & n = nodes_[id];
    if (!n.requires_grad) {
      return;
    }
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

private:
  struct Node
  {
    Matrix value;
    Matrix grad;
    Backward backward;
    long param_index = -1;
    bool requires_grad = false;
  };

  const ParamStore * params_;
  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, int> param_nodes_;
};

// ---------------------------------------------------------------------------
// Operations. Shapes are checked with assertions in debug builds.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
/// a (n x m) + b (1 x m) broadcast over rows.
Var add_row(Var a, Var b);
/// a (n x m) * c (n x 1) broadcast over columns.
Var mul_col(Var a, Var c);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var silu(Var a);
Var square(Var a);
/// Elementwise a^p for a > 0.
Var pow(Var a, double p);
/// Gradient is passed only where lo <= a <= hi.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
/// Per-row sum: (n x m) -> (n x 1).
Var row_sum(Var a);
/// Per-column max over rows: (n x m) -> (1 x m).
Var col_max(Var a);

Var concat_cols(const std::vector<Var> & parts);
Var concat_rows(const std::vector<Var> & parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var transpose(Var a);
/// (1 x m) -> (n x m).
Var broadcast_rows(Var a, Eigen::Index n);
/// Each row repeated `times` consecutively: (n x m) -> (n*times x m).
Var repeat_rows(Var a, Eigen::Index times);
/// Sums consecutive groups of `group` rows: (n*group x m) -> (n x m).
Var group_sum_rows(Var a, Eigen::Index group);

/// Per-column max within consecutive row segments of the given sizes:
/// (sum(sizes) x m) -> (sizes.size() x m). Every size must be >= 1.
Var segment_max_rows(Var a, const std::vector<Eigen::Index> & sizes);
/// Row i of the result is row index[i] of a; gradients scatter-add back.
Var gather_rows(Var a, const std::vector<Eigen::Index> & index);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// (n x m) -> (n x 1), max-subtracted.
Var logsumexp_rows(Var a);
/// Row-wise standardization without affine terms.
Var layer_norm_rows(Var a, double eps = 1e-5);

/// Same value, no gradient flows through.
Var stop_gradient(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace vbmix::ad

#endif  // VBMIX__AUTODIFF_HPP_
