#include <cmath>
#include <doctest.h>
#include <vector>

#include "splitgan/autodiff.hpp"
#include "splitgan/errors.hpp"
#include "test_util.hpp"

using namespace splitgan;
using namespace splitgan::ad;
using testutil::fd_grad;
using testutil::random_tensor;
using testutil::rel_err;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("elementwise add") {
  Tape t;
  Var a = t.leaf(Tensor({2}, {1, 2}));
  Var b = t.leaf(Tensor({2}, {3, 4}));
  Var c = add(a, b);
  CHECK(c.val()[0] == 4.0);
  CHECK(c.val()[1] == 6.0);
}

TEST_CASE("matmul identity") {
  Tape t;
  Var i2 = t.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
  Var m = t.leaf(Tensor({2, 2}, {1.5, -2.0, 3.25, 0.5}));
  Var r = matmul(i2, m);
  for (std::size_t k = 0; k < 4; ++k) CHECK(r.val()[k] == m.val()[k]);
}

TEST_CASE("l2 norm of a 3-4-5 triangle") {
  Tape t;
  Var v = t.leaf(Tensor({2}, {3, 4}));
  CHECK(l2_norm(v).val().item() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("shape mismatch names both shapes") {
  Tape t;
  Var a = t.leaf(Tensor({2}, {1, 2}));
  Var b = t.leaf(Tensor({3}, {1, 2, 3}));
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2]"), ShapeError);
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[3]"), ShapeError);
}

TEST_CASE("non-finite output raises a numeric fault") {
  Tape t;
  Var a = t.leaf(Tensor({1}, {-1.0}));
  CHECK_THROWS_AS(ad::log(a), NumericFault);
}

TEST_CASE("backward power rule and log") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(3.0), true);
  GradientMap g = backward(square(x));
  CHECK(g.at(x).item() == doctest::Approx(6.0));

  Tape t2;
  Var y = t2.leaf(Tensor::scalar(2.0), true);
  GradientMap g2 = backward(ad::log(y));
  CHECK(g2.at(y).item() == doctest::Approx(0.5));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape t;
  Var x = t.leaf(Tensor({2}, {1, 2}), true);
  CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("gradient of sum(W x) matches finite differences") {
  // d sum(W x)/dW with x = [1,1] is a matrix of ones, one per row.
  Rng rng(11);
  Tensor w0 = random_tensor({3, 2}, rng);
  Tensor x0({2, 1}, {1, 1});

  auto f = [&](const Tensor& w) {
    Tape t;
    Var wv = t.leaf(w, true);
    Var xv = t.leaf(x0);
    return sum(matmul(wv, xv)).val().item();
  };
  Tensor fd = fd_grad(f, w0);

  Tape t;
  Var wv = t.leaf(w0, true);
  Var xv = t.leaf(x0);
  GradientMap g = backward(sum(matmul(wv, xv)));
  CHECK(rel_err(g.at(wv), fd) < 1e-8);
  for (std::size_t i = 0; i < 6; ++i) CHECK(g.at(wv)[i] == doctest::Approx(1.0));
}

TEST_CASE("gradient accumulates over repeated use of a leaf") {
  // x*x + x*x  ==  2*x^2, so the gradient must be 4x.
  Tape t;
  Var x = t.leaf(Tensor::scalar(1.75), true);
  Var twice = add(mul(x, x), mul(x, x));
  GradientMap g = backward(twice);

  Tape t2;
  Var y = t2.leaf(Tensor::scalar(1.75), true);
  GradientMap g2 = backward(scale(square(y), 2.0));
  CHECK(g.at(x).item() == doctest::Approx(g2.at(y).item()).epsilon(1e-15));
  CHECK(g.at(x).item() == doctest::Approx(7.0));
}

TEST_CASE("linearity of backward") {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor x0 = random_tensor({4}, rng, 0.3, 2.0);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);

    Tape t;
    Var x = t.leaf(x0, true);
    Var f = sum(mul(x, x));
    Var g = sum(ad::log(x));
    Var combo = add(scale(f, a), scale(g, b));
    Tensor grad_combo = backward(combo).at(x);

    Tape t2;
    Var x2 = t2.leaf(x0, true);
    Tensor gf = backward(sum(mul(x2, x2))).at(x2);
    Tape t3;
    Var x3 = t3.leaf(x0, true);
    Tensor gg = backward(sum(ad::log(x3))).at(x3);

    for (std::size_t i = 0; i < x0.size(); ++i)
      CHECK(grad_combo[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// Finite-difference sweep over every primitive.
// Random inputs in [-2,2]; points within 1e-3 of a leaky_relu kink are
// resampled since the subgradient there is one-sided.
// ---------------------------------------------------------------------------

namespace {

struct PrimitiveCase {
  const char* name;
  std::vector<std::vector<std::size_t>> arg_shapes;
  std::function<Var(Tape&, std::vector<Var>&)> build;
  double lo = -2.0, hi = 2.0;
  bool avoid_kink = false;
};

std::vector<PrimitiveCase> primitive_cases() {
  using V = std::vector<Var>;
  std::vector<PrimitiveCase> cases;
  auto red = [](Var v) { return v.val().size() == 1 ? v : sum(v); };

  cases.push_back({"add", {{3, 2}, {3, 2}}, [red](Tape&, V& a) { return red(add(a[0], a[1])); }});
  cases.push_back({"sub", {{3, 2}, {3, 2}}, [red](Tape&, V& a) { return red(sub(a[0], a[1])); }});
  cases.push_back({"mul", {{3, 2}, {3, 2}}, [red](Tape&, V& a) { return red(mul(a[0], a[1])); }});
  cases.push_back({"div", {{3, 2}, {3, 2}},
                   [red](Tape&, V& a) { return red(div(a[0], a[1])); },
                   0.5, 2.0});
  cases.push_back({"neg", {{4}}, [red](Tape&, V& a) { return red(neg(a[0])); }});
  cases.push_back({"scale", {{4}}, [red](Tape&, V& a) { return red(scale(a[0], -1.7)); }});
  cases.push_back({"add_scalar", {{4}}, [red](Tape&, V& a) { return red(add_scalar(a[0], 0.9)); }});
  cases.push_back({"leaky_relu", {{8}},
                   [red](Tape&, V& a) { return red(leaky_relu(a[0], 0.2)); },
                   -2.0, 2.0, true});
  cases.push_back({"tanh", {{4}}, [red](Tape&, V& a) { return red(ad::tanh(a[0])); }});
  cases.push_back({"sigmoid", {{4}}, [red](Tape&, V& a) { return red(sigmoid(a[0])); }});
  cases.push_back({"log", {{4}}, [red](Tape&, V& a) { return red(ad::log(a[0])); }, 0.2, 2.0});
  cases.push_back({"exp", {{4}}, [red](Tape&, V& a) { return red(ad::exp(a[0])); }});
  cases.push_back({"square", {{4}}, [red](Tape&, V& a) { return red(square(a[0])); }});
  cases.push_back({"sqrt", {{4}}, [red](Tape&, V& a) { return red(ad::sqrt(a[0])); }, 0.3, 2.0});
  cases.push_back({"clamp", {{6}},
                   [red](Tape&, V& a) { return red(clamp(a[0], -0.75, 0.75)); }});
  cases.push_back({"matmul", {{3, 4}, {4, 2}},
                   [red](Tape&, V& a) { return red(matmul(a[0], a[1])); }});
  cases.push_back({"transpose", {{3, 4}},
                   [red](Tape&, V& a) { return red(mul(transpose(a[0]), transpose(a[0]))); }});
  cases.push_back({"affine", {{3, 4}, {4, 2}, {2}},
                   [red](Tape&, V& a) { return red(affine(a[0], a[1], a[2])); }});
  cases.push_back({"reshape", {{3, 4}},
                   [red](Tape&, V& a) { return red(square(reshape(a[0], {4, 3}))); }});
  cases.push_back({"add_rowvec", {{3, 4}, {4}},
                   [red](Tape&, V& a) { return red(add_rowvec(a[0], a[1])); }});
  cases.push_back({"mul_rowvec", {{3, 4}, {4}},
                   [red](Tape&, V& a) { return red(mul_rowvec(a[0], a[1])); }});
  cases.push_back({"add_colvec", {{3, 4}, {3}},
                   [red](Tape&, V& a) { return red(add_colvec(a[0], a[1])); }});
  cases.push_back({"mul_colvec", {{3, 4}, {3}},
                   [red](Tape&, V& a) { return red(mul_colvec(a[0], a[1])); }});
  cases.push_back({"broadcast_rows", {{4}},
                   [red](Tape&, V& a) { return red(square(broadcast_rows(a[0], 3))); }});
  cases.push_back({"broadcast_cols", {{3}},
                   [red](Tape&, V& a) { return red(square(broadcast_cols(a[0], 4))); }});
  cases.push_back({"spread", {{}},
                   [red](Tape&, V& a) { return red(square(spread(a[0], {3, 2}))); }});
  cases.push_back({"sum", {{3, 4}}, [](Tape&, V& a) { return sum(a[0]); }});
  cases.push_back({"mean", {{3, 4}}, [](Tape&, V& a) { return mean(a[0]); }});
  cases.push_back({"colsum", {{3, 4}}, [red](Tape&, V& a) { return red(square(colsum(a[0]))); }});
  cases.push_back({"rowsum", {{3, 4}}, [red](Tape&, V& a) { return red(square(rowsum(a[0]))); }});
  cases.push_back({"l2_norm", {{5}}, [](Tape&, V& a) { return l2_norm(a[0]); }});
  cases.push_back({"l2_norm_rows", {{3, 4}},
                   [red](Tape&, V& a) { return red(l2_norm_rows(a[0])); }});
  cases.push_back({"concat_rows", {{2, 3}, {4, 3}},
                   [red](Tape&, V& a) { return red(square(concat(a[0], a[1], 0))); }});
  cases.push_back({"concat_cols", {{3, 2}, {3, 4}},
                   [red](Tape&, V& a) { return red(square(concat(a[0], a[1], 1))); }});
  cases.push_back({"slice", {{4, 5}},
                   [red](Tape&, V& a) { return red(square(slice(a[0], 1, 1, 4))); }});
  cases.push_back({"index_select", {{4, 3}},
                   [red](Tape&, V& a) {
                     return red(square(index_select(a[0], {2, 0, 2, 3, 1})));
                   }});
  cases.push_back({"index_scatter_add", {{5, 3}},
                   [red](Tape&, V& a) {
                     return red(square(index_scatter_add(a[0], {2, 0, 2, 3, 1}, 4)));
                   }});
  return cases;
}

}  // namespace

TEST_CASE("every primitive gradient matches central finite differences") {
  Rng rng(2024);
  for (const PrimitiveCase& pc : primitive_cases()) {
    CAPTURE(pc.name);
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<Tensor> args;
      for (const auto& shape : pc.arg_shapes) {
        Tensor a = random_tensor(shape, rng, pc.lo, pc.hi);
        if (pc.avoid_kink) {
          for (std::size_t i = 0; i < a.size(); ++i)
            while (std::abs(a[i]) < 1e-3) a[i] = rng.uniform(pc.lo, pc.hi);
        }
        args.push_back(std::move(a));
      }
      for (std::size_t wrt = 0; wrt < args.size(); ++wrt) {
        auto f = [&](const Tensor& x) {
          Tape t;
          std::vector<Var> vars;
          for (std::size_t k = 0; k < args.size(); ++k)
            vars.push_back(t.leaf(k == wrt ? x : args[k], k == wrt));
          return pc.build(t, vars).val().item();
        };
        Tensor fd = fd_grad(f, args[wrt]);

        Tape t;
        std::vector<Var> vars;
        for (std::size_t k = 0; k < args.size(); ++k)
          vars.push_back(t.leaf(args[k], k == wrt));
        Tensor got = backward(pc.build(t, vars)).at(vars[wrt]);
        CHECK(rel_err(got, fd) < 1e-5);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Second order
// ---------------------------------------------------------------------------

TEST_CASE("second derivative of x^3 via grad_with_graph") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(2.0), true);
  Var fx = mul(square(x), x);
  Var dfdx = grad_with_graph(fx, x);  // 3x^2 = 12
  CHECK(dfdx.val().item() == doctest::Approx(12.0));
  GradientMap g2 = backward(dfdx);  // 6x = 12
  CHECK(g2.at(x).item() == doctest::Approx(12.0));
}

TEST_CASE("constant root yields zero gradient and zero second gradient") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {1, 2, 3}), true);
  Var c = t.scalar(4.2);
  Var g = grad_with_graph(c, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.val()[i] == 0.0);
  GradientMap gg = backward(sum(square(g)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(gg.at(x)[i] == 0.0);
}

TEST_CASE("grad_with_graph rejects off-tape targets") {
  Tape t, t2;
  Var x = t.leaf(Tensor::scalar(1.0), true);
  Var y = t2.leaf(Tensor::scalar(1.0), true);
  CHECK_THROWS_AS(grad_with_graph(square(x), y), ContractError);
}

TEST_CASE("linear critic: parameter gradient of the norm penalty is analytic") {
  // D(x) = w.x  =>  grad_x D = w, and d/dw (||w|| - 1)^2 = 2(||w||-1) w/||w||.
  Rng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor w0 = random_tensor({3}, rng, 0.3, 2.0);
    Tensor x0 = random_tensor({3}, rng);

    Tape t;
    Var w = t.leaf(w0, true);
    Var x = t.leaf(x0, true);
    Var score = sum(mul(w, x));
    Var gx = grad_with_graph(score, x);
    Var penalty = square(add_scalar(l2_norm(gx), -1.0));
    Tensor got = backward(penalty).at(w);

    double nw = std::sqrt(w0[0] * w0[0] + w0[1] * w0[1] + w0[2] * w0[2]);
    for (std::size_t i = 0; i < 3; ++i) {
      double want = 2.0 * (nw - 1.0) * w0[i] / nw;
      CHECK(got[i] == doctest::Approx(want).epsilon(1e-6));
    }

    // Cross-check the same quantity against finite differences.
    auto f = [&](const Tensor& wt) {
      Tape t2;
      Var w2 = t2.leaf(wt, true);
      Var x2 = t2.leaf(x0, true);
      Var gx2 = grad_with_graph(sum(mul(w2, x2)), x2);
      return square(add_scalar(l2_norm(gx2), -1.0)).val().item();
    };
    CHECK(rel_err(got, fd_grad(f, w0)) < 1e-6);
  }
}

namespace {

// Small leaky-relu MLP with explicit weight tensors; used for the
// reverse-over-reverse check below.
struct TinyMlp {
  std::vector<Tensor> w, b;

  static TinyMlp make(const std::vector<std::size_t>& dims, Rng& rng) {
    TinyMlp m;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      m.w.push_back(random_tensor({dims[l], dims[l + 1]}, rng, -0.8, 0.8));
      m.b.push_back(random_tensor({dims[l + 1]}, rng, -0.3, 0.3));
    }
    return m;
  }

  // Scalar output summed over the batch.
  Var forward(Tape& t, const Var& x, std::vector<Var>& wv, std::vector<Var>& bv,
              bool params_require_grad) const {
    wv.clear();
    bv.clear();
    Var h = x;
    for (std::size_t l = 0; l < w.size(); ++l) {
      wv.push_back(t.leaf(w[l], params_require_grad));
      bv.push_back(t.leaf(b[l], params_require_grad));
      h = affine(h, wv[l], bv[l]);
      if (l + 1 < w.size()) h = leaky_relu(h, 0.2);
    }
    return sum(h);
  }

  // Keeps every preactivation away from the leaky_relu kink so finite
  // differences stay valid.
  bool kink_margin_ok(const Tensor& x, double margin = 1e-3) const {
    Tape t;
    Var h = t.leaf(x);
    std::vector<Var> wv, bv;
    for (std::size_t l = 0; l < w.size(); ++l) {
      Var wl = t.leaf(w[l]);
      Var bl = t.leaf(b[l]);
      h = affine(h, wl, bl);
      const Tensor& pre = h.val();
      for (std::size_t i = 0; i < pre.size(); ++i)
        if (std::abs(pre[i]) < margin) return false;
      if (l + 1 < w.size()) h = leaky_relu(h, 0.2);
    }
    return true;
  }
};

}  // namespace

TEST_CASE("parameter gradient of input-gradient norm matches finite differences") {
  Rng rng(99);
  int done = 0;
  while (done < 6) {
    TinyMlp mlp = TinyMlp::make({3, 6, 5, 1}, rng);
    Tensor x0 = random_tensor({2, 3}, rng);
    if (!mlp.kink_margin_ok(x0)) continue;  // finite differences invalid at kinks
    ++done;

    // g(theta) = || grad_x D(x) ||^2 with the inner gradient by autodiff.
    auto norm_sq_of_input_grad = [&](const TinyMlp& m) {
      Tape t;
      Var x = t.leaf(x0, true);
      std::vector<Var> wv, bv;
      Var out = m.forward(t, x, wv, bv, false);
      Var gx = grad_with_graph(out, x);
      return sum(square(gx)).val().item();
    };

    Tape t;
    Var x = t.leaf(x0, true);
    std::vector<Var> wv, bv;
    Var out = mlp.forward(t, x, wv, bv, true);
    Var gx = grad_with_graph(out, x);
    GradientMap grads = backward(sum(square(gx)));

    for (std::size_t l = 0; l < mlp.w.size(); ++l) {
      TinyMlp probe = mlp;
      auto f = [&](const Tensor& wt) {
        probe.w[l] = wt;
        return norm_sq_of_input_grad(probe);
      };
      CHECK(rel_err(grads.at(wv[l]), fd_grad(f, mlp.w[l])) < 1e-4);

      TinyMlp probe_b = mlp;
      auto fb = [&](const Tensor& bt) {
        probe_b.b[l] = bt;
        return norm_sq_of_input_grad(probe_b);
      };
      CHECK(rel_err(grads.at(bv[l]), fd_grad(fb, mlp.b[l])) < 1e-4);
    }
  }
}

TEST_SUITE_END();
