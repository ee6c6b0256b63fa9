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

#include "vbmix/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace vbmix::ad
{

std::size_t ParamStore::add(std::string name, Matrix init)
{
  if (index_.count(name)) {
    throw std::logic_error("duplicate parameter name: " + name);
  }
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(init)});
  return params_.size() - 1;
}

std::size_t ParamStore::index_of(const std::string & name) const
{
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  return it->second;
}

std::size_t ParamStore::scalar_count() const
{
  std::size_t n = 0;
  for (const auto & p : params_) {
    n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

std::size_t ParamStore::scalar_count(const std::string & prefix) const
{
  std::size_t n = 0;
  for (const auto & p : params_) {
    if (p.name.rfind(prefix, 0) == 0) {
      n += static_cast<std::size_t>(p.value.size());
    }
  }
  return n;
}

std::vector<Matrix> ParamStore::zeros_like() const
{
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto & p : params_) {
    out.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  return out;
}

const Matrix & Var::value() const { return tape->value(id); }

Tape::Tape(const ParamStore & params, bool record) : params_(&params), record_(record)
{
  nodes_.reserve(1024);
}

Var Tape::constant(Matrix m)
{
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(double x) { return constant(Matrix::Constant(1, 1, x)); }

Var Tape::param(std::size_t index)
{
  auto it = param_nodes_.find(index);
  if (it != param_nodes_.end()) {
    return Var{this, it->second};
  }
  Node n;
  n.value = (*params_)[index].value;
  n.param_index = static_cast<long>(index);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(index, id);
  return Var{this, id};
}

Var Tape::push(Matrix value, std::initializer_list<int> inputs, Backward backward)
{
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (int i : inputs) {
      if (nodes_[i].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) {
      n.backward = std::move(backward);
    }
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accum(int id, const Matrix & g) { accum_expr(id, g); }

void Tape::backward(Var root)
{
  if (!record_) {
    throw std::logic_error("backward on a non-recording tape");
  }
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::logic_error("backward root must be a scalar");
  }
  for (auto & n : nodes_) {
    n.grad.resize(0, 0);
  }
  if (!nodes_[root.id].requires_grad) {
    return;
  }
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (int id = root.id; id >= 0; --id) {
    Node & n = nodes_[id];
    if (n.grad.size() == 0 || !n.backward) {
      continue;
    }
    n.backward(*this, id);
  }
}

void Tape::accumulate_param_grads(std::vector<Matrix> & grads) const
{
  for (const auto & [index, id] : param_nodes_) {
    const Node & n = nodes_[id];
    if (n.grad.size() != 0) {
      grads[index] += n.grad;
    }
  }
}

namespace
{

Tape & tape_of(Var a, Var b)
{
  assert(a.tape == b.tape);
  (void)b;
  return *a.tape;
}

}  // namespace

Var matmul(Var a, Var b)
{
  Tape & t = tape_of(a, b);
  assert(a.cols() == b.rows());
  const int ia = a.id, ib = b.id;
  return t.push(a.value() * b.value(), {ia, ib}, [ia, ib](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      tp.accum_expr(ia, g * tp.value(ib).transpose());
    }
    if (tp.requires_grad(ib)) {
      tp.accum_expr(ib, tp.value(ia).transpose() * g);
    }
  });
}

Var add(Var a, Var b)
{
  Tape & t = tape_of(a, b);
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id, ib = b.id;
  return t.push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape & tp, int self) {
    tp.accum(ia, tp.grad(self));
    tp.accum(ib, tp.grad(self));
  });
}

Var sub(Var a, Var b)
{
  Tape & t = tape_of(a, b);
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id, ib = b.id;
  return t.push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape & tp, int self) {
    tp.accum(ia, tp.grad(self));
    tp.accum_expr(ib, -tp.grad(self));
  });
}

Var mul(Var a, Var b)
{
  Tape & t = tape_of(a, b);
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id, ib = b.id;
  return t.push(
    a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape & tp, int self) {
      const Matrix & g = tp.grad(self);
      tp.accum_expr(ia, g.cwiseProduct(tp.value(ib)));
      tp.accum_expr(ib, g.cwiseProduct(tp.value(ia)));
    });
}

Var div(Var a, Var b)
{
  Tape & t = tape_of(a, b);
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const int ia = a.id, ib = b.id;
  return t.push(
    a.value().cwiseQuotient(b.value()), {ia, ib}, [ia, ib](Tape & tp, int self) {
      const Matrix & g = tp.grad(self);
      const Matrix & bv = tp.value(ib);
      tp.accum_expr(ia, g.cwiseQuotient(bv));
      if (tp.requires_grad(ib)) {
        tp.accum_expr(
          ib, -g.cwiseProduct(tp.value(self)).cwiseQuotient(bv));
      }
    });
}

Var add_row(Var a, Var b)
{
  Tape & t = tape_of(a, b);
  assert(b.rows() == 1 && a.cols() == b.cols());
  const int ia = a.id, ib = b.id;
  Matrix out = a.value().rowwise() + b.value().row(0);
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    tp.accum(ia, g);
    if (tp.requires_grad(ib)) {
      tp.accum_expr(ib, g.colwise().sum());
    }
  });
}

Var mul_col(Var a, Var c)
{
  Tape & t = tape_of(a, c);
  assert(c.cols() == 1 && a.rows() == c.rows());
  const int ia = a.id, ic = c.id;
  Matrix out = a.value().array().colwise() * c.value().col(0).array();
  return t.push(std::move(out), {ia, ic}, [ia, ic](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Matrix ga = g.array().colwise() * tp.value(ic).col(0).array();
      tp.accum(ia, ga);
    }
    if (tp.requires_grad(ic)) {
      tp.accum_expr(ic, g.cwiseProduct(tp.value(ia)).rowwise().sum());
    }
  });
}

Var scale(Var a, double c)
{
  const int ia = a.id;
  return a.tape->push(c * a.value(), {ia}, [ia, c](Tape & tp, int self) {
    tp.accum_expr(ia, c * tp.grad(self));
  });
}

Var add_scalar(Var a, double c)
{
  const int ia = a.id;
  Matrix out = a.value().array() + c;
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    tp.accum(ia, tp.grad(self));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var exp(Var a)
{
  const int ia = a.id;
  Matrix out = a.value().array().exp();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    tp.accum_expr(ia, tp.grad(self).cwiseProduct(tp.value(self)));
  });
}

Var log(Var a)
{
  const int ia = a.id;
  Matrix out = a.value().array().log();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    tp.accum_expr(ia, tp.grad(self).cwiseQuotient(tp.value(ia)));
  });
}

Var tanh(Var a)
{
  const int ia = a.id;
  Matrix out = a.value().array().tanh();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    const Matrix & y = tp.value(self);
    tp.accum_expr(
      ia, (tp.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(Var a)
{
  const int ia = a.id;
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    const Matrix & y = tp.value(self);
    tp.accum_expr(
      ia, (tp.grad(self).array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var silu(Var a)
{
  const int ia = a.id;
  const auto & x = a.value().array();
  Matrix out = x * (1.0 + (-x).exp()).inverse();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    const auto x = tp.value(ia).array();
    const Eigen::ArrayXXd s = (1.0 + (-x).exp()).inverse();
    tp.accum_expr(
      ia, (tp.grad(self).array() * (s * (1.0 + x * (1.0 - s)))).matrix());
  });
}

Var square(Var a)
{
  const int ia = a.id;
  Matrix out = a.value().array().square();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    tp.accum_expr(ia, (2.0 * tp.grad(self).array() * tp.value(ia).array()).matrix());
  });
}

Var pow(Var a, double p)
{
  const int ia = a.id;
  Matrix out = a.value().array().pow(p);
  return a.tape->push(std::move(out), {ia}, [ia, p](Tape & tp, int self) {
    tp.accum_expr(
      ia, (tp.grad(self).array() * p * tp.value(ia).array().pow(p - 1.0)).matrix());
  });
}

Var clamp(Var a, double lo, double hi)
{
  const int ia = a.id;
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape->push(std::move(out), {ia}, [ia, lo, hi](Tape & tp, int self) {
    const auto x = tp.value(ia).array();
    tp.accum_expr(
      ia, ((x >= lo && x <= hi).cast<double>() * tp.grad(self).array()).matrix());
  });
}

Var sum(Var a)
{
  const int ia = a.id;
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape->push(Matrix::Constant(1, 1, a.value().sum()), {ia}, [ia, r, c](Tape & tp, int self) {
    tp.accum_expr(ia, Matrix::Constant(r, c, tp.grad(self)(0, 0)));
  });
}

Var mean(Var a)
{
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a)
{
  const int ia = a.id;
  const Eigen::Index c = a.cols();
  Matrix out = a.value().rowwise().sum();
  return a.tape->push(std::move(out), {ia}, [ia, c](Tape & tp, int self) {
    tp.accum_expr(ia, tp.grad(self).replicate(1, c));
  });
}

Var col_max(Var a)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  assert(v.rows() > 0);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(v.cols()));
  Matrix out(1, v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index best = 0;
    v.col(j).maxCoeff(&best);
    arg[static_cast<std::size_t>(j)] = best;
    out(0, j) = v(best, j);
  }
  const Eigen::Index r = v.rows();
  return a.tape->push(
    std::move(out), {ia}, [ia, r, arg = std::move(arg)](Tape & tp, int self) {
      const Matrix & g = tp.grad(self);
      Matrix ga = Matrix::Zero(r, g.cols());
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        ga(arg[static_cast<std::size_t>(j)], j) = g(0, j);
      }
      tp.accum(ia, ga);
    });
}

Var concat_cols(const std::vector<Var> & parts)
{
  assert(!parts.empty());
  Tape & t = *parts.front().tape;
  const Eigen::Index r = parts.front().rows();
  Eigen::Index c = 0;
  bool any = false;
  for (const auto & p : parts) {
    assert(p.rows() == r);
    c += p.cols();
    any = any || t.requires_grad(p.id);
  }
  Matrix out(r, c);
  std::vector<std::pair<int, Eigen::Index>> spans;
  spans.reserve(parts.size());
  Eigen::Index off = 0;
  for (const auto & p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    spans.emplace_back(p.id, p.cols());
    off += p.cols();
  }
  if (!t.recording() || !any) {
    return t.push(std::move(out), {}, nullptr);
  }
  int seed = spans.front().first;
  for (const auto & [id, w] : spans) {
    if (t.requires_grad(id)) {
      seed = id;
      break;
    }
  }
  return t.push(std::move(out), {seed}, [spans](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    Eigen::Index o = 0;
    for (const auto & [id, w] : spans) {
      if (tp.requires_grad(id)) {
        tp.accum_expr(id, g.middleCols(o, w));
      }
      o += w;
    }
  });
}

Var concat_rows(const std::vector<Var> & parts)
{
  assert(!parts.empty());
  Tape & t = *parts.front().tape;
  const Eigen::Index c = parts.front().cols();
  Eigen::Index r = 0;
  bool any = false;
  for (const auto & p : parts) {
    assert(p.cols() == c);
    r += p.rows();
    any = any || t.requires_grad(p.id);
  }
  Matrix out(r, c);
  std::vector<std::pair<int, Eigen::Index>> spans;
  spans.reserve(parts.size());
  Eigen::Index off = 0;
  for (const auto & p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    spans.emplace_back(p.id, p.rows());
    off += p.rows();
  }
  if (!t.recording() || !any) {
    return t.push(std::move(out), {}, nullptr);
  }
  int seed = spans.front().first;
  for (const auto & [id, w] : spans) {
    if (t.requires_grad(id)) {
      seed = id;
      break;
    }
  }
  return t.push(std::move(out), {seed}, [spans](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    Eigen::Index o = 0;
    for (const auto & [id, w] : spans) {
      if (tp.requires_grad(id)) {
        tp.accum_expr(id, g.middleRows(o, w));
      }
      o += w;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count)
{
  const int ia = a.id;
  assert(start >= 0 && start + count <= a.cols());
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix out = a.value().middleCols(start, count);
  return a.tape->push(std::move(out), {ia}, [ia, start, count, r, c](Tape & tp, int self) {
    Matrix ga = Matrix::Zero(r, c);
    ga.middleCols(start, count) = tp.grad(self);
    tp.accum(ia, ga);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count)
{
  const int ia = a.id;
  assert(start >= 0 && start + count <= a.rows());
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix out = a.value().middleRows(start, count);
  return a.tape->push(std::move(out), {ia}, [ia, start, count, r, c](Tape & tp, int self) {
    Matrix ga = Matrix::Zero(r, c);
    ga.middleRows(start, count) = tp.grad(self);
    tp.accum(ia, ga);
  });
}

Var transpose(Var a)
{
  const int ia = a.id;
  Matrix out = a.value().transpose();
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    tp.accum_expr(ia, tp.grad(self).transpose());
  });
}

Var broadcast_rows(Var a, Eigen::Index n)
{
  assert(a.rows() == 1);
  const int ia = a.id;
  Matrix out = a.value().replicate(n, 1);
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    tp.accum_expr(ia, tp.grad(self).colwise().sum());
  });
}

Var repeat_rows(Var a, Eigen::Index times)
{
  const int ia = a.id;
  if (times == 1) {
    return a;
  }
  const Matrix & v = a.value();
  Matrix out(v.rows() * times, v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    out.middleRows(i * times, times) = v.row(i).replicate(times, 1);
  }
  const Eigen::Index r = v.rows();
  return a.tape->push(std::move(out), {ia}, [ia, r, times](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    Matrix ga(r, g.cols());
    for (Eigen::Index i = 0; i < r; ++i) {
      ga.row(i) = g.middleRows(i * times, times).colwise().sum();
    }
    tp.accum(ia, ga);
  });
}

Var group_sum_rows(Var a, Eigen::Index group)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  assert(v.rows() % group == 0);
  const Eigen::Index n = v.rows() / group;
  Matrix out(n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = v.middleRows(i * group, group).colwise().sum();
  }
  return a.tape->push(std::move(out), {ia}, [ia, group, n](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    Matrix ga(n * group, g.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      ga.middleRows(i * group, group) = g.row(i).replicate(group, 1);
    }
    tp.accum(ia, ga);
  });
}

namespace
{

Matrix softmax_value(const Matrix & v)
{
  Matrix out = v;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    out.row(i) = (v.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

Var segment_max_rows(Var a, const std::vector<Eigen::Index> & sizes)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  const auto n_seg = static_cast<Eigen::Index>(sizes.size());
  Matrix out(n_seg, v.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(n_seg * v.cols()));
  Eigen::Index start = 0;
  for (Eigen::Index s = 0; s < n_seg; ++s) {
    const Eigen::Index len = sizes[static_cast<std::size_t>(s)];
    assert(len >= 1);
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      Eigen::Index best = 0;
      out(s, j) = v.col(j).segment(start, len).maxCoeff(&best);
      arg[static_cast<std::size_t>(s * v.cols() + j)] = start + best;
    }
    start += len;
  }
  assert(start == v.rows());
  const Eigen::Index r = v.rows();
  return a.tape->push(
    std::move(out), {ia}, [ia, r, arg = std::move(arg)](Tape & tp, int self) {
      const Matrix & g = tp.grad(self);
      Matrix ga = Matrix::Zero(r, g.cols());
      for (Eigen::Index s = 0; s < g.rows(); ++s) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
          ga(arg[static_cast<std::size_t>(s * g.cols() + j)], j) += g(s, j);
        }
      }
      tp.accum(ia, ga);
    });
}

Var gather_rows(Var a, const std::vector<Eigen::Index> & index)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), v.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = v.row(index[i]);
  }
  const Eigen::Index r = v.rows();
  return a.tape->push(std::move(out), {ia}, [ia, r, index](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    Matrix ga = Matrix::Zero(r, g.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
      ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    }
    tp.accum(ia, ga);
  });
}

Var softmax_rows(Var a)
{
  const int ia = a.id;
  return a.tape->push(softmax_value(a.value()), {ia}, [ia](Tape & tp, int self) {
    const Matrix & y = tp.value(self);
    const Matrix & g = tp.grad(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = y.cwiseProduct(g.colwise() - dot);
    tp.accum(ia, ga);
  });
}

Var log_softmax_rows(Var a)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  Matrix out = v;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    const double lse = m + std::log((v.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    const Matrix & g = tp.grad(self);
    const Matrix p = tp.value(self).array().exp();
    const Eigen::VectorXd gs = g.rowwise().sum();
    Matrix ga = g - (p.array().colwise() * gs.array()).matrix();
    tp.accum(ia, ga);
  });
}

Var logsumexp_rows(Var a)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  Matrix out(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    out(i, 0) = m + std::log((v.row(i).array() - m).exp().sum());
  }
  return a.tape->push(std::move(out), {ia}, [ia](Tape & tp, int self) {
    const Matrix & x = tp.value(ia);
    const Matrix & y = tp.value(self);
    const Matrix & g = tp.grad(self);
    Matrix ga = (x.colwise() - y.col(0)).array().exp();
    ga.array().colwise() *= g.col(0).array();
    tp.accum(ia, ga);
  });
}

Var layer_norm_rows(Var a, double eps)
{
  const int ia = a.id;
  const Matrix & v = a.value();
  const Eigen::Index m = v.cols();
  Eigen::VectorXd mu = v.rowwise().mean();
  Matrix centered = v.colwise() - mu;
  Eigen::VectorXd inv_std =
    ((centered.array().square().rowwise().sum() / static_cast<double>(m)) + eps).rsqrt();
  Matrix out = centered.array().colwise() * inv_std.array();
  return a.tape->push(std::move(out), {ia}, [ia, inv_std, m](Tape & tp, int self) {
    const Matrix & y = tp.value(self);
    const Matrix & g = tp.grad(self);
    const double dm = static_cast<double>(m);
    const Eigen::VectorXd g_mean = g.rowwise().mean();
    const Eigen::VectorXd gy_mean = g.cwiseProduct(y).rowwise().sum() / dm;
    Matrix ga = g.colwise() - g_mean;
    ga -= (y.array().colwise() * gy_mean.array()).matrix();
    ga.array().colwise() *= inv_std.array();
    tp.accum(ia, ga);
  });
}

Var stop_gradient(Var a) { return a.tape->constant(a.value()); }

}  // namespace vbmix::ad
