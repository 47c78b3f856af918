#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "scgan/numcore/matrix.hpp"

namespace scgan {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var
{
  Tape       *tape = nullptr;
  std::size_t id   = 0;
};

/// Reverse-mode recording of matrix primitives.
///
/// Every primitive appends one node holding its forward value and a closure
/// that pushes the node's adjoint back to its inputs. Nodes are only
/// differentiated when some parameter feeds into them, so constants (data
/// batches, frozen networks) cost nothing on the backward pass.
class Tape
{
public:
  using BackwardFn = std::function<void(Tape &, std::size_t self)>;

  Tape()                        = default;
  Tape(Tape const &)            = delete;
  Tape &operator=(Tape const &) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, {}); }
  Var parameter(Matrix value) { return push(std::move(value), true, {}); }

  Matrix const &value(Var v) const { return nodes_.at(v.id).value; }
  double        scalar(Var v) const
  {
    auto const &m = value(v);
    if (m.rows() != 1 || m.cols() != 1)
    {
      throw ShapeError("scalar(): node is " + m.shape_string());
    }
    return m(0, 0);
  }

  /// Adjoint of v after backward(); zeros if v never received gradient.
  Matrix grad(Var v) const
  {
    auto const &n = nodes_.at(v.id);
    if (n.grad.empty())
    {
      return Matrix(n.value.rows(), n.value.cols());
    }
    return n.grad;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var out)
  {
    auto const &v = value(out);
    if (v.rows() != 1 || v.cols() != 1)
    {
      throw ShapeError("backward(): output must be 1x1, got " + v.shape_string());
    }
    for (auto &n : nodes_)
    {
      n.grad = Matrix();
    }
    nodes_[out.id].grad = Matrix(1, 1, 1.0);
    for (std::size_t i = out.id + 1; i-- > 0;)
    {
      auto &n = nodes_[i];
      if (n.requires_grad && n.backward && !n.grad.empty())
      {
        n.backward(*this, i);
      }
    }
  }

  /// Record a primitive. Used by the op functions below.
  Var record(Matrix value, std::vector<Var> const &inputs, BackwardFn fn)
  {
    bool needs = false;
    for (auto const &in : inputs)
    {
      if (in.tape != this)
      {
        throw std::logic_error("tape: mixing values from different tapes");
      }
      needs = needs || nodes_[in.id].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  Matrix const &adjoint(std::size_t id) const { return nodes_[id].grad; }

  void accumulate(Var target, Matrix const &g)
  {
    auto &n = nodes_[target.id];
    if (!n.requires_grad)
    {
      return;
    }
    if (n.grad.empty())
    {
      n.grad = g;
    }
    else
    {
      n.grad += g;
    }
  }

private:
  struct Node
  {
    Matrix     value;
    Matrix     grad;
    bool       requires_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn fn)
  {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(fn)});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

namespace ops {

inline Tape &tape_of(Var a)
{
  if (a.tape == nullptr)
  {
    throw std::logic_error("tape: null variable");
  }
  return *a.tape;
}

inline Var matmul(Var a, Var b)
{
  Tape &t = tape_of(a);
  return t.record(scgan::matmul(t.value(a), t.value(b)), {a, b}, [a, b](Tape &tp, std::size_t self) {
    auto const &g = tp.adjoint(self);
    if (tp.requires_grad(a))
    {
      tp.accumulate(a, matmul_nt(g, tp.value(b)));
    }
    if (tp.requires_grad(b))
    {
      tp.accumulate(b, matmul_tn(tp.value(a), g));
    }
  });
}

/// a * b^T
inline Var matmul_nt(Var a, Var b)
{
  Tape &t = tape_of(a);
  return t.record(scgan::matmul_nt(t.value(a), t.value(b)), {a, b},
                  [a, b](Tape &tp, std::size_t self) {
                    auto const &g = tp.adjoint(self);
                    if (tp.requires_grad(a))
                    {
                      tp.accumulate(a, scgan::matmul(g, tp.value(b)));
                    }
                    if (tp.requires_grad(b))
                    {
                      tp.accumulate(b, matmul_tn(g, tp.value(a)));
                    }
                  });
}

inline Var transpose(Var a)
{
  Tape &t = tape_of(a);
  return t.record(scgan::transpose(t.value(a)), {a}, [a](Tape &tp, std::size_t self) {
    tp.accumulate(a, scgan::transpose(tp.adjoint(self)));
  });
}

inline Var add(Var a, Var b)
{
  Tape &t = tape_of(a);
  t.value(a).require_same_shape(t.value(b), "add");
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape &tp, std::size_t self) {
    tp.accumulate(a, tp.adjoint(self));
    tp.accumulate(b, tp.adjoint(self));
  });
}

inline Var sub(Var a, Var b)
{
  Tape &t = tape_of(a);
  t.value(a).require_same_shape(t.value(b), "sub");
  return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape &tp, std::size_t self) {
    tp.accumulate(a, tp.adjoint(self));
    tp.accumulate(b, -1.0 * tp.adjoint(self));
  });
}

inline Var scale(Var a, double s)
{
  Tape &t = tape_of(a);
  return t.record(t.value(a) * s, {a}, [a, s](Tape &tp, std::size_t self) {
    tp.accumulate(a, tp.adjoint(self) * s);
  });
}

/// Adds a 1 x cols row to every row of a.
inline Var add_row(Var a, Var row)
{
  Tape        &t  = tape_of(a);
  Matrix const &av = t.value(a);
  Matrix const &rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols())
  {
    throw ShapeError("add_row: " + av.shape_string() + " + " + rv.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
  {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c)
    {
      dst[c] += rv(0, c);
    }
  }
  return t.record(std::move(out), {a, row}, [a, row](Tape &tp, std::size_t self) {
    auto const &g = tp.adjoint(self);
    tp.accumulate(a, g);
    if (tp.requires_grad(row))
    {
      Matrix gr(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
      {
        for (std::size_t c = 0; c < g.cols(); ++c)
        {
          gr(0, c) += g(r, c);
        }
      }
      tp.accumulate(row, gr);
    }
  });
}

inline Var hadamard(Var a, Var b)
{
  Tape &t = tape_of(a);
  Matrix const &av = t.value(a);
  Matrix const &bv = t.value(b);
  av.require_same_shape(bv, "hadamard");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i)
  {
    out.data()[i] *= bv.data()[i];
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape &tp, std::size_t self) {
    auto const &g = tp.adjoint(self);
    if (tp.requires_grad(a))
    {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i)
      {
        ga.data()[i] *= tp.value(b).data()[i];
      }
      tp.accumulate(a, ga);
    }
    if (tp.requires_grad(b))
    {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i)
      {
        gb.data()[i] *= tp.value(a).data()[i];
      }
      tp.accumulate(b, gb);
    }
  });
}

inline Var leaky_relu(Var a, double slope)
{
  Tape  &t   = tape_of(a);
  Matrix out = t.value(a);
  for (auto &v : out.data())
  {
    v = v > 0.0 ? v : slope * v;
  }
  return t.record(std::move(out), {a}, [a, slope](Tape &tp, std::size_t self) {
    Matrix      g  = tp.adjoint(self);
    auto const &av = tp.value(a);
    for (std::size_t i = 0; i < g.size(); ++i)
    {
      if (av.data()[i] <= 0.0)
      {
        g.data()[i] *= slope;
      }
    }
    tp.accumulate(a, g);
  });
}

/// log(1 + e^x), elementwise.
inline Var softplus(Var a)
{
  Tape  &t   = tape_of(a);
  Matrix out = t.value(a);
  for (auto &v : out.data())
  {
    v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  return t.record(std::move(out), {a}, [a](Tape &tp, std::size_t self) {
    Matrix      g  = tp.adjoint(self);
    auto const &av = tp.value(a);
    for (std::size_t i = 0; i < g.size(); ++i)
    {
      double const x = av.data()[i];
      double const s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      g.data()[i] *= s;
    }
    tp.accumulate(a, g);
  });
}

inline Var sum(Var a)
{
  Tape  &t   = tape_of(a);
  double acc = 0.0;
  for (double v : t.value(a).data())
  {
    acc += v;
  }
  return t.record(Matrix(1, 1, acc), {a}, [a](Tape &tp, std::size_t self) {
    auto const &av = tp.value(a);
    tp.accumulate(a, Matrix(av.rows(), av.cols(), tp.adjoint(self)(0, 0)));
  });
}

inline Var mean(Var a)
{
  Tape &t = tape_of(a);
  auto const n = static_cast<double>(t.value(a).size());
  if (n == 0.0)
  {
    throw ShapeError("mean of empty matrix");
  }
  return scale(sum(a), 1.0 / n);
}

/// Squared Frobenius norm, as a 1x1 node.
inline Var sum_squares(Var a)
{
  Tape &t = tape_of(a);
  return t.record(Matrix(1, 1, frobenius_sq(t.value(a))), {a}, [a](Tape &tp, std::size_t self) {
    tp.accumulate(a, tp.value(a) * (2.0 * tp.adjoint(self)(0, 0)));
  });
}

/// Frobenius norm. The subgradient at the zero matrix is taken as 0.
inline Var frobenius_norm(Var a)
{
  Tape        &t    = tape_of(a);
  double const norm = std::sqrt(frobenius_sq(t.value(a)));
  return t.record(Matrix(1, 1, norm), {a}, [a, norm](Tape &tp, std::size_t self) {
    if (norm == 0.0)
    {
      return;
    }
    tp.accumulate(a, tp.value(a) * (tp.adjoint(self)(0, 0) / norm));
  });
}

/// Elementwise square root of a non-negative matrix; the gradient at 0 is taken as 0.
inline Var sqrt(Var a)
{
  Tape  &t   = tape_of(a);
  Matrix out = t.value(a);
  for (auto &v : out.data())
  {
    if (v < 0.0)
    {
      throw NumericError("sqrt: negative input");
    }
    v = std::sqrt(v);
  }
  return t.record(out, {a}, [a, out](Tape &tp, std::size_t self) {
    Matrix g = tp.adjoint(self);
    auto   o = out.data();
    for (std::size_t i = 0; i < g.size(); ++i)
    {
      g.data()[i] = o[i] > 0.0 ? g.data()[i] / (2.0 * o[i]) : 0.0;
    }
    tp.accumulate(a, g);
  });
}

/// out(i, j) = ||a_i - b_j||^2 over rows of a (n x d) and b (m x d).
inline Var pairwise_sq_dist(Var a, Var b)
{
  Tape        &t  = tape_of(a);
  Matrix const &av = t.value(a);
  Matrix const &bv = t.value(b);
  if (av.cols() != bv.cols())
  {
    throw ShapeError("pairwise_sq_dist: " + av.shape_string() + " vs " + bv.shape_string());
  }
  Matrix out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
  {
    for (std::size_t j = 0; j < bv.rows(); ++j)
    {
      out(i, j) = squared_distance(av.row(i), bv.row(j));
    }
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape &tp, std::size_t self) {
    auto const &g  = tp.adjoint(self);
    auto const &av = tp.value(a);
    auto const &bv = tp.value(b);
    Matrix      ga(av.rows(), av.cols());
    Matrix      gb(bv.rows(), bv.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
    {
      for (std::size_t j = 0; j < bv.rows(); ++j)
      {
        double const w = 2.0 * g(i, j);
        for (std::size_t k = 0; k < av.cols(); ++k)
        {
          double const diff = av(i, k) - bv(j, k);
          ga(i, k) += w * diff;
          gb(j, k) -= w * diff;
        }
      }
    }
    tp.accumulate(a, ga);
    tp.accumulate(b, gb);
  });
}

}  // namespace ops
}  // namespace scgan
