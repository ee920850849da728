#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "splitgan/tensor.hpp"

namespace splitgan::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; never outlives its tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& val() const;
  const std::vector<std::size_t>& shape() const { return val().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool defined() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Per-parent pullback: given the adjoint of this node's output (and the node
/// itself for ops whose derivative reuses the output), emit tape operations
/// computing the adjoint contribution for parent `slot`. Because the pullback
/// builds ordinary tape nodes, gradients are themselves differentiable.
using Vjp = std::function<Var(const Var& grad_out, const Var& self, std::size_t slot)>;

/// Gradients keyed by leaf node. Leaves that the root does not depend on
/// read back as zeros.
class GradientMap {
 public:
  bool contains(const Var& leaf) const { return grads_.count(leaf.id()) != 0; }
  const Tensor& at(const Var& leaf) const;
  std::size_t size() const { return grads_.size(); }
  void insert(std::size_t id, Tensor grad) { grads_.emplace(id, std::move(grad)); }

 private:
  std::unordered_map<std::size_t, Tensor> grads_;
};

/// Append-only record of a differentiable computation. Node ids are already
/// a topological order. A tape is confined to one thread; distinct tapes may
/// run in parallel.
class Tape {
 public:
  struct Node {
    Tensor value;
    const char* op;
    Vjp vjp;  // empty for leaves (and for lean gradient nodes)
    std::array<std::uint32_t, 3> parents{};  // every primitive has <= 3
    std::uint8_t n_parents = 0;
    bool grad_leaf = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  Var emplace(Tensor value, const char* op, std::initializer_list<std::size_t> parents,
              Vjp vjp);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }

  /// While set, emplace() records values only (no pullbacks, no parents).
  /// The terminal reverse sweep in backward() runs this way: its nodes are
  /// read once as gradient values and never differentiated again.
  class LeanScope {
   public:
    explicit LeanScope(Tape& t) : tape_(t), prev_(t.lean_) { t.lean_ = true; }
    ~LeanScope() { tape_.lean_ = prev_; }

   private:
    Tape& tape_;
    bool prev_;
  };

 private:
  friend class LeanScope;
  std::deque<Node> nodes_;
  bool lean_ = false;
};

// ---- arithmetic (elementwise, shapes must match exactly) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

// ---- unary elementwise ----
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var leaky_relu(const Var& a, double slope = 0.2);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// ---- matrix ----
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// x[B,in] * w[in,out] + b[out] with the bias broadcast over the batch rows;
/// the only tensor-tensor broadcast this library allows.
Var affine(const Var& x, const Var& w, const Var& b);
Var reshape(const Var& a, std::vector<std::size_t> shape);

// ---- batch-axis broadcasts (matrix op vector) ----
Var add_rowvec(const Var& x, const Var& v);   // [B,F] + [F] per row
Var mul_rowvec(const Var& x, const Var& v);   // [B,F] * [F] per row
Var add_colvec(const Var& x, const Var& s);   // [B,F] + [B] per column
Var mul_colvec(const Var& x, const Var& s);   // [B,F] * [B] per column
Var broadcast_rows(const Var& v, std::size_t n_rows);  // [F] -> [B,F]
Var broadcast_cols(const Var& s, std::size_t n_cols);  // [B] -> [B,F]
Var spread(const Var& scalar, std::vector<std::size_t> shape);

// ---- reductions ----
Var sum(const Var& a);     // all elements -> scalar
Var mean(const Var& a);    // all elements -> scalar
Var colsum(const Var& x);  // [B,F] -> [F]
Var rowsum(const Var& x);  // [B,F] -> [B]
Var colmean(const Var& x);

// ---- norms; 1e-12 added under the square root so the derivative stays
// finite when the norm underflows to zero ----
Var l2_norm(const Var& a);
Var l2_norm_rows(const Var& x);  // [B,F] -> [B], per-sample norms

// ---- structure ----
Var concat(const Var& a, const Var& b, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Rows of `table` selected per id; pullback scatter-adds into the table.
Var index_select(const Var& table, const std::vector<std::int64_t>& ids);
Var index_scatter_add(const Var& src, const std::vector<std::int64_t>& ids,
                      std::size_t table_rows);

/// Reverse sweep from a scalar root. Returns gradients for every grad leaf
/// on the tape; a leaf used through several paths accumulates all of them.
GradientMap backward(const Var& root);

/// Gradient of a scalar root w.r.t. one traced node, returned as a tape
/// node so that expressions of it (e.g. its norm) can be differentiated
/// again. A root that does not depend on `wrt` yields a zeros constant.
Var grad_with_graph(const Var& root, const Var& wrt);

}  // namespace splitgan::ad
