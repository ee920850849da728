#include "splitgan/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>

#include "splitgan/errors.hpp"

namespace splitgan::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const EMat>;
using Map = Eigen::Map<EMat>;

Tape& tape_of(const Var& a, const char* op) {
  if (!a.defined()) throw ContractError(std::string(op) + ": undefined operand");
  return *a.tape();
}

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape())
    throw ContractError(std::string(op) + ": operands live on different tapes");
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + a.val().shape_str() +
                     " vs " + b.val().shape_str());
}

void require_rank2(const Var& a, const char* op) {
  if (a.val().rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank-2 operand, got " +
                     a.val().shape_str());
}

}  // namespace

const Tensor& Var::val() const { return tape_->node(id_).value; }

const Tensor& GradientMap::at(const Var& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end())
    throw ContractError("gradient map: no entry for node " + std::to_string(leaf.id()));
  return it->second;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericFault("leaf: non-finite value");
  Node n;
  n.value = std::move(value);
  n.op = "leaf";
  n.grad_leaf = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::emplace(Tensor value, const char* op, std::initializer_list<std::size_t> parents,
                  Vjp vjp) {
  if (!value.all_finite())
    throw NumericFault(std::string(op) + ": produced non-finite values");
  Node n;
  n.value = std::move(value);
  n.op = op;
  if (!lean_) {
    n.vjp = std::move(vjp);
    for (std::size_t p : parents) n.parents[n.n_parents++] = static_cast<std::uint32_t>(p);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

// ---------------------------------------------------------------- arithmetic

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, "add");
  require_same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.emplace(std::move(out), "add", {a.id(), b.id()},
                   [](const Var& g, const Var&, std::size_t) { return g; });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, "sub");
  require_same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return t.emplace(std::move(out), "sub", {a.id(), b.id()},
                   [](const Var& g, const Var&, std::size_t slot) {
                     return slot == 0 ? g : neg(g);
                   });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, "mul");
  require_same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.emplace(std::move(out), "mul", {a.id(), b.id()},
                   [a, b](const Var& g, const Var&, std::size_t slot) {
                     return slot == 0 ? mul(g, b) : mul(g, a);
                   });
}

Var div(const Var& a, const Var& b) {
  Tape& t = tape_of(a, "div");
  require_same_tape(a, b, "div");
  require_same_shape(a, b, "div");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  return t.emplace(std::move(out), "div", {a.id(), b.id()},
                   [a, b](const Var& g, const Var& self, std::size_t slot) {
                     if (slot == 0) return div(g, b);
                     return neg(div(mul(g, self), b));
                   });
}

// ------------------------------------------------------------------- unary

namespace {

template <typename Fwd>
Var unary(const Var& a, const char* op, Fwd&& f, Vjp vjp) {
  Tape& t = tape_of(a, op);
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  return t.emplace(std::move(out), op, {a.id()}, std::move(vjp));
}

}  // namespace

Var neg(const Var& a) {
  return unary(a, "neg", [](double x) { return -x; },
               [](const Var& g, const Var&, std::size_t) { return neg(g); });
}

Var scale(const Var& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; },
               [c](const Var& g, const Var&, std::size_t) { return scale(g, c); });
}

Var add_scalar(const Var& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; },
               [](const Var& g, const Var&, std::size_t) { return g; });
}

Var leaky_relu(const Var& a, double slope) {
  // Subgradient at 0 takes the negative-side slope.
  return unary(a, "leaky_relu", [slope](double x) { return x > 0 ? x : slope * x; },
               [a, slope](const Var& g, const Var&, std::size_t) {
                 Tensor mask = a.val();
                 for (std::size_t i = 0; i < mask.size(); ++i)
                   mask[i] = mask[i] > 0 ? 1.0 : slope;
                 return mul(g, a.tape()->constant(std::move(mask)));
               });
}

Var tanh(const Var& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](const Var& g, const Var& self, std::size_t) {
                 return mul(g, add_scalar(neg(square(self)), 1.0));
               });
}

Var sigmoid(const Var& a) {
  // Branching form keeps exp from overflowing for large |x|.
  return unary(a, "sigmoid",
               [](double x) {
                 if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                 double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [](const Var& g, const Var& self, std::size_t) {
                 return mul(g, mul(self, add_scalar(neg(self), 1.0)));
               });
}

Var log(const Var& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [a](const Var& g, const Var&, std::size_t) { return div(g, a); });
}

Var exp(const Var& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](const Var& g, const Var& self, std::size_t) { return mul(g, self); });
}

Var square(const Var& a) {
  return unary(a, "square", [](double x) { return x * x; },
               [a](const Var& g, const Var&, std::size_t) {
                 return scale(mul(g, a), 2.0);
               });
}

Var sqrt(const Var& a) {
  return unary(a, "sqrt", [](double x) { return std::sqrt(x); },
               [](const Var& g, const Var& self, std::size_t) {
                 return div(scale(g, 0.5), self);
               });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(a, "clamp", [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
               [a, lo, hi](const Var& g, const Var&, std::size_t) {
                 Tensor mask = a.val();
                 for (std::size_t i = 0; i < mask.size(); ++i)
                   mask[i] = (mask[i] >= lo && mask[i] <= hi) ? 1.0 : 0.0;
                 return mul(g, a.tape()->constant(std::move(mask)));
               });
}

// ------------------------------------------------------------------ matrix

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, "matmul");
  require_same_tape(a, b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.dim(1) != bv.dim(0))
    throw ShapeError("matmul: inner extents differ " + av.shape_str() + " vs " +
                     bv.shape_str());
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  Map(out.data(), m, n).noalias() = MapC(av.data(), m, k) * MapC(bv.data(), k, n);
  return t.emplace(std::move(out), "matmul", {a.id(), b.id()},
                   [a, b](const Var& g, const Var&, std::size_t slot) {
                     if (slot == 0) return matmul(g, transpose(b));
                     return matmul(transpose(a), g);
                   });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a, "transpose");
  require_rank2(a, "transpose");
  const Tensor& av = a.val();
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out({n, m});
  Map(out.data(), n, m).noalias() = MapC(av.data(), m, n).transpose();
  return t.emplace(std::move(out), "transpose", {a.id()},
                   [](const Var& g, const Var&, std::size_t) { return transpose(g); });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  Tape& t = tape_of(x, "affine");
  require_same_tape(x, w, "affine");
  require_same_tape(x, b, "affine");
  require_rank2(x, "affine");
  require_rank2(w, "affine");
  const Tensor& xv = x.val();
  const Tensor& wv = w.val();
  const Tensor& bv = b.val();
  if (xv.dim(1) != wv.dim(0))
    throw ShapeError("affine: input/weight extents differ " + xv.shape_str() +
                     " vs " + wv.shape_str());
  if (bv.rank() != 1 || bv.dim(0) != wv.dim(1))
    throw ShapeError("affine: bias " + bv.shape_str() + " does not match weight " +
                     wv.shape_str());
  const std::size_t m = xv.dim(0), k = xv.dim(1), n = wv.dim(1);
  Tensor out({m, n});
  Map o(out.data(), m, n);
  o.noalias() = MapC(xv.data(), m, k) * MapC(wv.data(), k, n);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), n);
  return t.emplace(std::move(out), "affine", {x.id(), w.id(), b.id()},
                   [x, w](const Var& g, const Var&, std::size_t slot) {
                     if (slot == 0) return matmul(g, transpose(w));
                     if (slot == 1) return matmul(transpose(x), g);
                     return colsum(g);
                   });
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tape& t = tape_of(a, "reshape");
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != a.val().size())
    throw ShapeError("reshape: " + a.val().shape_str() + " -> " +
                     Tensor::shape_str(shape) + " changes element count");
  Tensor out(std::move(shape), std::vector<double>(a.val().data(),
                                                   a.val().data() + a.val().size()));
  std::vector<std::size_t> old_shape = a.val().shape();
  return t.emplace(std::move(out), "reshape", {a.id()},
                   [old_shape](const Var& g, const Var&, std::size_t) {
                     return reshape(g, old_shape);
                   });
}

// ------------------------------------------------------- batch broadcasts

namespace {

void require_rowvec(const Var& x, const Var& v, const char* op) {
  require_rank2(x, op);
  if (v.val().rank() != 1 || v.val().dim(0) != x.val().dim(1))
    throw ShapeError(std::string(op) + ": vector " + v.val().shape_str() +
                     " does not match matrix " + x.val().shape_str());
}

void require_colvec(const Var& x, const Var& s, const char* op) {
  require_rank2(x, op);
  if (s.val().rank() != 1 || s.val().dim(0) != x.val().dim(0))
    throw ShapeError(std::string(op) + ": vector " + s.val().shape_str() +
                     " does not match matrix " + x.val().shape_str());
}

}  // namespace

Var add_rowvec(const Var& x, const Var& v) {
  Tape& t = tape_of(x, "add_rowvec");
  require_same_tape(x, v, "add_rowvec");
  require_rowvec(x, v, "add_rowvec");
  Tensor out = x.val();
  const Tensor& vv = v.val();
  const std::size_t rows = out.dim(0), cols = out.dim(1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += vv[c];
  return t.emplace(std::move(out), "add_rowvec", {x.id(), v.id()},
                   [](const Var& g, const Var&, std::size_t slot) {
                     return slot == 0 ? g : colsum(g);
                   });
}

Var mul_rowvec(const Var& x, const Var& v) {
  Tape& t = tape_of(x, "mul_rowvec");
  require_same_tape(x, v, "mul_rowvec");
  require_rowvec(x, v, "mul_rowvec");
  Tensor out = x.val();
  const Tensor& vv = v.val();
  const std::size_t rows = out.dim(0), cols = out.dim(1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) *= vv[c];
  return t.emplace(std::move(out), "mul_rowvec", {x.id(), v.id()},
                   [x, v](const Var& g, const Var&, std::size_t slot) {
                     if (slot == 0) return mul_rowvec(g, v);
                     return colsum(mul(g, x));
                   });
}

Var add_colvec(const Var& x, const Var& s) {
  Tape& t = tape_of(x, "add_colvec");
  require_same_tape(x, s, "add_colvec");
  require_colvec(x, s, "add_colvec");
  Tensor out = x.val();
  const Tensor& sv = s.val();
  const std::size_t rows = out.dim(0), cols = out.dim(1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += sv[r];
  return t.emplace(std::move(out), "add_colvec", {x.id(), s.id()},
                   [](const Var& g, const Var&, std::size_t slot) {
                     return slot == 0 ? g : rowsum(g);
                   });
}

Var mul_colvec(const Var& x, const Var& s) {
  Tape& t = tape_of(x, "mul_colvec");
  require_same_tape(x, s, "mul_colvec");
  require_colvec(x, s, "mul_colvec");
  Tensor out = x.val();
  const Tensor& sv = s.val();
  const std::size_t rows = out.dim(0), cols = out.dim(1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) *= sv[r];
  return t.emplace(std::move(out), "mul_colvec", {x.id(), s.id()},
                   [x, s](const Var& g, const Var&, std::size_t slot) {
                     if (slot == 0) return mul_colvec(g, s);
                     return rowsum(mul(g, x));
                   });
}

Var broadcast_rows(const Var& v, std::size_t n_rows) {
  Tape& t = tape_of(v, "broadcast_rows");
  if (v.val().rank() != 1)
    throw ShapeError("broadcast_rows: expected rank-1, got " + v.val().shape_str());
  const Tensor& vv = v.val();
  const std::size_t cols = vv.dim(0);
  Tensor out({n_rows, cols});
  for (std::size_t r = 0; r < n_rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = vv[c];
  return t.emplace(std::move(out), "broadcast_rows", {v.id()},
                   [](const Var& g, const Var&, std::size_t) { return colsum(g); });
}

Var broadcast_cols(const Var& s, std::size_t n_cols) {
  Tape& t = tape_of(s, "broadcast_cols");
  if (s.val().rank() != 1)
    throw ShapeError("broadcast_cols: expected rank-1, got " + s.val().shape_str());
  const Tensor& sv = s.val();
  const std::size_t rows = sv.dim(0);
  Tensor out({rows, n_cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n_cols; ++c) out.at(r, c) = sv[r];
  return t.emplace(std::move(out), "broadcast_cols", {s.id()},
                   [](const Var& g, const Var&, std::size_t) { return rowsum(g); });
}

Var spread(const Var& scalar, std::vector<std::size_t> shape) {
  Tape& t = tape_of(scalar, "spread");
  if (scalar.val().size() != 1)
    throw ShapeError("spread: expected scalar, got " + scalar.val().shape_str());
  Tensor out = Tensor::full(std::move(shape), scalar.val()[0]);
  return t.emplace(std::move(out), "spread", {scalar.id()},
                   [](const Var& g, const Var&, std::size_t) { return sum(g); });
}

// -------------------------------------------------------------- reductions

Var sum(const Var& a) {
  Tape& t = tape_of(a, "sum");
  const Tensor& av = a.val();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
  std::vector<std::size_t> shape = av.shape();
  return t.emplace(Tensor::scalar(s), "sum", {a.id()},
                   [shape](const Var& g, const Var&, std::size_t) {
                     return spread(g, shape);
                   });
}

Var mean(const Var& a) {
  const Tensor& av = a.val();
  if (av.size() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(av.size()));
}

Var colsum(const Var& x) {
  Tape& t = tape_of(x, "colsum");
  require_rank2(x, "colsum");
  const Tensor& xv = x.val();
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out({cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += xv.at(r, c);
  return t.emplace(std::move(out), "colsum", {x.id()},
                   [rows](const Var& g, const Var&, std::size_t) {
                     return broadcast_rows(g, rows);
                   });
}

Var rowsum(const Var& x) {
  Tape& t = tape_of(x, "rowsum");
  require_rank2(x, "rowsum");
  const Tensor& xv = x.val();
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += xv.at(r, c);
  return t.emplace(std::move(out), "rowsum", {x.id()},
                   [cols](const Var& g, const Var&, std::size_t) {
                     return broadcast_cols(g, cols);
                   });
}

Var colmean(const Var& x) {
  require_rank2(x, "colmean");
  const std::size_t rows = x.val().dim(0);
  if (rows == 0) throw ContractError("colmean: empty batch");
  return scale(colsum(x), 1.0 / static_cast<double>(rows));
}

// ------------------------------------------------------------------- norms

namespace {
constexpr double kNormGuard = 1e-12;
}

Var l2_norm(const Var& a) {
  Tape& t = tape_of(a, "l2_norm");
  const Tensor& av = a.val();
  double s = kNormGuard;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * av[i];
  return t.emplace(Tensor::scalar(std::sqrt(s)), "l2_norm", {a.id()},
                   [a](const Var& g, const Var& self, std::size_t) {
                     return mul(a, spread(div(g, self), a.val().shape()));
                   });
}

Var l2_norm_rows(const Var& x) {
  Tape& t = tape_of(x, "l2_norm_rows");
  require_rank2(x, "l2_norm_rows");
  const Tensor& xv = x.val();
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = kNormGuard;
    for (std::size_t c = 0; c < cols; ++c) s += xv.at(r, c) * xv.at(r, c);
    out[r] = std::sqrt(s);
  }
  return t.emplace(std::move(out), "l2_norm_rows", {x.id()},
                   [x](const Var& g, const Var& self, std::size_t) {
                     return mul_colvec(x, div(g, self));
                   });
}

// --------------------------------------------------------------- structure

Var concat(const Var& a, const Var& b, std::size_t axis) {
  Tape& t = tape_of(a, "concat");
  require_same_tape(a, b, "concat");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.rank() != bv.rank() || av.rank() < 1 || av.rank() > 2 || axis >= av.rank())
    throw ShapeError("concat: unsupported operands " + av.shape_str() + " and " +
                     bv.shape_str() + " on axis " + std::to_string(axis));
  for (std::size_t d = 0; d < av.rank(); ++d) {
    if (d != axis && av.dim(d) != bv.dim(d))
      throw ShapeError("concat: shape mismatch off axis: " + av.shape_str() + " vs " +
                       bv.shape_str());
  }
  std::vector<std::size_t> shape = av.shape();
  shape[axis] += bv.dim(axis);
  Tensor out(shape);
  if (av.rank() == 1 || axis == 0) {
    std::copy(av.data(), av.data() + av.size(), out.data());
    std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  } else {
    const std::size_t rows = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(av.data() + r * ca, av.data() + (r + 1) * ca, out.data() + r * (ca + cb));
      std::copy(bv.data() + r * cb, bv.data() + (r + 1) * cb,
                out.data() + r * (ca + cb) + ca);
    }
  }
  const std::size_t split = av.dim(axis), total = shape[axis];
  return t.emplace(std::move(out), "concat", {a.id(), b.id()},
                   [axis, split, total](const Var& g, const Var&, std::size_t slot) {
                     return slot == 0 ? slice(g, axis, 0, split)
                                      : slice(g, axis, split, total);
                   });
}

namespace {

// Zero tensor with g placed at [begin,end) along axis; adjoint of slice.
Var embed(const Var& g, std::size_t axis, std::size_t begin,
          std::vector<std::size_t> full_shape) {
  Tape& t = tape_of(g, "embed");
  const Tensor& gv = g.val();
  Tensor out(full_shape);
  if (gv.rank() == 1 || axis == 0) {
    const std::size_t row_elems = gv.rank() == 2 ? gv.dim(1) : 1;
    std::copy(gv.data(), gv.data() + gv.size(), out.data() + begin * row_elems);
  } else {
    const std::size_t rows = gv.dim(0), gc = gv.dim(1), fc = full_shape[1];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(gv.data() + r * gc, gv.data() + (r + 1) * gc,
                out.data() + r * fc + begin);
  }
  const std::size_t end = begin + gv.dim(axis);
  return t.emplace(std::move(out), "embed", {g.id()},
                   [axis, begin, end](const Var& gg, const Var&, std::size_t) {
                     return slice(gg, axis, begin, end);
                   });
}

}  // namespace

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a, "slice");
  const Tensor& av = a.val();
  if (av.rank() < 1 || av.rank() > 2 || axis >= av.rank())
    throw ShapeError("slice: unsupported operand " + av.shape_str() + " on axis " +
                     std::to_string(axis));
  if (begin > end || end > av.dim(axis))
    throw ContractError("slice: range [" + std::to_string(begin) + "," +
                        std::to_string(end) + ") exceeds extent " +
                        std::to_string(av.dim(axis)));
  std::vector<std::size_t> shape = av.shape();
  shape[axis] = end - begin;
  Tensor out(shape);
  if (av.rank() == 1 || axis == 0) {
    const std::size_t row_elems = av.rank() == 2 ? av.dim(1) : 1;
    std::copy(av.data() + begin * row_elems, av.data() + end * row_elems, out.data());
  } else {
    const std::size_t rows = av.dim(0), fc = av.dim(1), oc = end - begin;
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(av.data() + r * fc + begin, av.data() + r * fc + end,
                out.data() + r * oc);
  }
  std::vector<std::size_t> full_shape = av.shape();
  return t.emplace(std::move(out), "slice", {a.id()},
                   [axis, begin, full_shape](const Var& g, const Var&, std::size_t) {
                     return embed(g, axis, begin, full_shape);
                   });
}

Var index_select(const Var& table, const std::vector<std::int64_t>& ids) {
  Tape& t = tape_of(table, "index_select");
  require_rank2(table, "index_select");
  const Tensor& tv = table.val();
  const std::size_t k = tv.dim(0), f = tv.dim(1);
  for (std::int64_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= k)
      throw ContractError("index_select: id " + std::to_string(id) +
                          " outside table with " + std::to_string(k) + " rows");
  }
  Tensor out({ids.size(), f});
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy(tv.data() + static_cast<std::size_t>(ids[r]) * f,
              tv.data() + (static_cast<std::size_t>(ids[r]) + 1) * f,
              out.data() + r * f);
  return t.emplace(std::move(out), "index_select", {table.id()},
                   [ids, k](const Var& g, const Var&, std::size_t) {
                     return index_scatter_add(g, ids, k);
                   });
}

Var index_scatter_add(const Var& src, const std::vector<std::int64_t>& ids,
                      std::size_t table_rows) {
  Tape& t = tape_of(src, "index_scatter_add");
  require_rank2(src, "index_scatter_add");
  const Tensor& sv = src.val();
  if (sv.dim(0) != ids.size())
    throw ShapeError("index_scatter_add: " + std::to_string(ids.size()) +
                     " ids vs source " + sv.shape_str());
  const std::size_t f = sv.dim(1);
  Tensor out({table_rows, f});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= table_rows)
      throw ContractError("index_scatter_add: id " + std::to_string(ids[r]) +
                          " outside table with " + std::to_string(table_rows) + " rows");
    for (std::size_t c = 0; c < f; ++c)
      out.at(static_cast<std::size_t>(ids[r]), c) += sv.at(r, c);
  }
  return t.emplace(std::move(out), "index_scatter_add", {src.id()},
                   [ids](const Var& g, const Var&, std::size_t) {
                     return index_select(g, ids);
                   });
}

// ---------------------------------------------------------- reverse sweep

namespace {

// Adjoints of every node between `targets` and a scalar root, as tape nodes.
// Only nodes on a path from some target to the root participate.
std::vector<std::optional<Var>> sweep(const Var& root, const std::vector<Var>& targets) {
  Tape& t = *root.tape();
  if (root.val().size() != 1)
    throw ContractError("backward: root must be scalar, got " + root.val().shape_str());

  std::size_t lo = root.id();
  std::vector<char> active(root.id() + 1, 0);
  for (const Var& v : targets) {
    if (v.tape() != root.tape())
      throw ContractError("backward: target not on the root's tape");
    if (v.id() <= root.id()) {
      active[v.id()] = 1;
      lo = std::min(lo, v.id());
    }
  }
  for (std::size_t i = lo; i <= root.id(); ++i) {
    if (active[i]) continue;
    const Tape::Node& n = t.node(i);
    for (std::uint8_t s = 0; s < n.n_parents; ++s) {
      if (active[n.parents[s]]) {
        active[i] = 1;
        break;
      }
    }
  }

  std::vector<std::optional<Var>> adj(root.id() + 1);
  if (!active[root.id()]) return adj;  // root independent of all targets

  adj[root.id()] = t.constant(Tensor::full(root.val().shape(), 1.0));
  for (std::size_t i = root.id() + 1; i-- > lo;) {
    if (!adj[i]) continue;
    const Tape::Node& n = t.node(i);
    if (!n.vjp) continue;
    Var self(&t, i);
    for (std::uint8_t slot = 0; slot < n.n_parents; ++slot) {
      const std::size_t p = n.parents[slot];
      if (!active[p]) continue;
      Var contrib = n.vjp(*adj[i], self, slot);
      adj[p] = adj[p] ? add(*adj[p], contrib) : contrib;
    }
  }
  return adj;
}

}  // namespace

GradientMap backward(const Var& root) {
  Tape& t = tape_of(root, "backward");
  std::vector<Var> leaves;
  for (std::size_t i = 0; i <= root.id(); ++i) {
    if (t.node(i).grad_leaf) leaves.emplace_back(&t, i);
  }
  // The gradients leave this call as plain tensors, so the sweep's scratch
  // nodes never need pullbacks of their own.
  Tape::LeanScope lean(t);
  auto adj = sweep(root, leaves);
  GradientMap out;
  for (const Var& leaf : leaves) {
    out.insert(leaf.id(), adj[leaf.id()] ? adj[leaf.id()]->val()
                                         : Tensor::zeros(leaf.val().shape()));
  }
  return out;
}

Var grad_with_graph(const Var& root, const Var& wrt) {
  Tape& t = tape_of(root, "grad_with_graph");
  if (wrt.tape() != root.tape() || wrt.id() >= t.size())
    throw ContractError("grad_with_graph: wrt is not on the root's tape");
  auto adj = sweep(root, {wrt});
  if (adj[wrt.id()]) return *adj[wrt.id()];
  return t.constant(Tensor::zeros(wrt.val().shape()));
}

}  // namespace splitgan::ad
