#include <cmath>
#include <doctest.h>

#include "splitgan/errors.hpp"
#include "splitgan/losses.hpp"
#include "test_util.hpp"

using namespace splitgan;
using namespace splitgan::loss;
using ad::Tape;
using ad::Var;
using testutil::fd_grad;
using testutil::random_tensor;
using testutil::rel_err;

TEST_SUITE_BEGIN("losses");

TEST_CASE("classic discriminator loss at 0.5/0.5 is 2 log 2") {
  Tape t;
  Var r = t.leaf(Tensor({1}, {0.5}));
  Var f = t.leaf(Tensor({1}, {0.5}));
  CHECK(gan_discriminator_loss(r, f).val().item() ==
        doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("perfect discriminator drives the loss to zero") {
  Tape t;
  Var r = t.leaf(Tensor({2}, {1.0 - 1e-9, 1.0 - 1e-9}));
  Var f = t.leaf(Tensor({2}, {1e-9, 1e-9}));
  CHECK(gan_discriminator_loss(r, f).val().item() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("classic losses match a direct scalar recomputation") {
  Rng rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor rv = random_tensor({6}, rng, 0.05, 0.95);
    Tensor fv = random_tensor({6}, rng, 0.05, 0.95);
    double want_d = 0, want_g = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      want_d += -std::log(rv[i]) - std::log(1 - fv[i]);
      want_g += -std::log(fv[i]);
    }
    want_d /= 6;
    want_g /= 6;
    Tape t;
    Var r = t.leaf(rv), f = t.leaf(fv);
    CHECK(gan_discriminator_loss(r, f).val().item() == doctest::Approx(want_d).epsilon(1e-12));
    CHECK(gan_generator_loss(f).val().item() == doctest::Approx(want_g).epsilon(1e-12));
  }
}

TEST_CASE("probabilities outside [0,1] are a contract violation") {
  Tape t;
  Var bad = t.leaf(Tensor({1}, {1.5}));
  Var ok = t.leaf(Tensor({1}, {0.5}));
  CHECK_THROWS_AS(gan_discriminator_loss(bad, ok), ContractError);
  CHECK_THROWS_AS(gan_generator_loss(bad), ContractError);
}

TEST_CASE("generator loss examples") {
  Tape t;
  CHECK(gan_generator_loss(t.leaf(Tensor({1}, {1.0}))).val().item() ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(gan_generator_loss(t.leaf(Tensor({1}, {0.5}))).val().item() ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("critic core arithmetic") {
  Tape t;
  Var same = t.leaf(Tensor({3}, {0.3, -1.2, 4.0}));
  CHECK(wgan_critic_core(same, same).val().item() == doctest::Approx(0.0));
  Var r = t.leaf(Tensor({2}, {1.0, 3.0}));
  Var f = t.leaf(Tensor({2}, {0.0, 0.0}));
  CHECK(wgan_critic_core(r, f).val().item() == doctest::Approx(-2.0));
}

TEST_CASE("critic core is antisymmetric and matches recomputation") {
  Rng rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor rv = random_tensor({5}, rng);
    Tensor fv = random_tensor({5}, rng);
    double mr = 0, mf = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      mr += rv[i];
      mf += fv[i];
    }
    Tape t;
    Var r = t.leaf(rv), f = t.leaf(fv);
    const double fwd = wgan_critic_core(r, f).val().item();
    CHECK(fwd == doctest::Approx(mf / 5 - mr / 5).epsilon(1e-12));
    CHECK(wgan_critic_core(f, r).val().item() == doctest::Approx(-fwd).epsilon(1e-12));
  }
}

TEST_CASE("generator wgan loss") {
  Tape t;
  CHECK(generator_wgan_loss(t.leaf(Tensor({1}, {0.0}))).val().item() == 0.0);
  CHECK(generator_wgan_loss(t.leaf(Tensor({2}, {2.0, 4.0}))).val().item() ==
        doctest::Approx(-3.0));
  Rng rng(4);
  Tensor fv = random_tensor({7}, rng);
  double m = 0;
  for (std::size_t i = 0; i < 7; ++i) m += fv[i];
  CHECK(generator_wgan_loss(t.leaf(fv)).val().item() ==
        doctest::Approx(-m / 7).epsilon(1e-12));
}

TEST_CASE("interpolates collapse when endpoints coincide") {
  Rng rng(5);
  Tensor x = random_tensor({4, 2}, rng);
  Tensor got = sample_interpolates(x, x, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(got[i] == doctest::Approx(x[i]));
}

TEST_CASE("interpolates stay inside the segment, per coordinate") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor a = random_tensor({8, 3}, rng);
    Tensor b = random_tensor({8, 3}, rng);
    Tensor x = sample_interpolates(a, b, rng);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(x[i] >= std::min(a[i], b[i]) - 1e-12);
      CHECK(x[i] <= std::max(a[i], b[i]) + 1e-12);
    }
  }
}

TEST_CASE("interpolates use one epsilon per sample") {
  // With x_real = 1 and x_fake = 0 the output IS the epsilon; rows must not
  // all agree for a healthy generator.
  Rng rng(7);
  Tensor ones = Tensor::full({16, 2}, 1.0);
  Tensor zeros = Tensor::zeros({16, 2});
  Tensor x = sample_interpolates(ones, zeros, rng);
  bool all_same = true;
  for (std::size_t i = 1; i < 16; ++i) all_same &= (x.at(i, 0) == x.at(0, 0));
  CHECK(!all_same);
  for (std::size_t i = 0; i < 16; ++i) CHECK(x.at(i, 0) == x.at(i, 1));  // shared per row
}

TEST_CASE("interpolates reject mismatched shapes") {
  Rng rng(7);
  CHECK_THROWS_AS(sample_interpolates(Tensor({2, 2}), Tensor({3, 2}), rng), ShapeError);
}

namespace {

net::Critic linear_critic(const std::vector<double>& w) {
  net::CriticConfig cfg;
  cfg.in_dim = w.size();
  cfg.hidden = {w.size()};
  Rng rng(1);
  net::Critic c(cfg, 1, rng);
  // Identity trunk (weights I, bias 0) with positive activations assumed,
  // score head = w. leaky_relu is identity for positive inputs.
  for (std::size_t i = 0; i < cfg.in_dim; ++i)
    for (std::size_t j = 0; j < cfg.in_dim; ++j)
      c.weights_[0].value.at(i, j) = i == j ? 1.0 : 0.0;
  for (std::size_t i = 0; i < cfg.in_dim; ++i) c.biases_[0].value[i] = 0.0;
  for (std::size_t i = 0; i < cfg.in_dim; ++i) c.score_w_.value[i] = w[i];
  c.score_b_.value[0] = 0.0;
  return c;
}

}  // namespace

TEST_CASE("unit-gradient critic has zero penalty, norm-3 critic has penalty 4") {
  Rng rng(9);
  Tensor x = random_tensor({6, 2}, rng, 0.5, 2.0);  // positive orthant: trunk is linear
  {
    net::Critic c = linear_critic({0.6, 0.8});  // ||w|| = 1
    Tape t;
    net::Binding b(t, true);
    CHECK(gradient_penalty(c, b, x).val().item() == doctest::Approx(0.0).epsilon(1e-9));
  }
  {
    net::Critic c = linear_critic({0.0, 3.0});  // ||w|| = 3
    Tape t;
    net::Binding b(t, true);
    CHECK(gradient_penalty(c, b, x).val().item() == doctest::Approx(4.0).epsilon(1e-9));
  }
}

TEST_CASE("penalty is non-negative on random critics") {
  Rng rng(10);
  for (int rep = 0; rep < 5; ++rep) {
    net::CriticConfig cfg;
    cfg.in_dim = 2;
    cfg.hidden = {6, 6};
    net::Critic c(cfg, 1, rng);
    Tensor x = random_tensor({5, 2}, rng);
    Tape t;
    net::Binding b(t, true);
    CHECK(gradient_penalty(c, b, x).val().item() >= 0.0);
  }
}

TEST_CASE("penalty parameter gradient matches finite differences") {
  Rng rng(11);
  int done = 0;
  while (done < 3) {
    net::CriticConfig cfg;
    cfg.in_dim = 2;
    cfg.hidden = {5, 4};
    net::Critic c(cfg, 1, rng);
    Tensor x = random_tensor({3, 2}, rng);

    auto penalty_value = [&](net::Critic& probe) {
      Tape t;
      net::Binding b(t, true);
      return gradient_penalty(probe, b, x).val().item();
    };

    // Keep the finite-difference probe away from activation kinks.
    bool margin_ok = true;
    {
      Tape t;
      net::Binding b(t, false);
      Var h = t.constant(x);
      for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
        h = ad::affine(h, b.var(c.weights_[l]), b.var(c.biases_[l]));
        for (std::size_t i = 0; i < h.val().size(); ++i)
          margin_ok &= std::abs(h.val()[i]) > 1e-3;
        h = ad::leaky_relu(h, 0.2);
      }
    }
    if (!margin_ok) continue;
    ++done;

    Tape t;
    net::Binding b(t, true);
    Var pen = gradient_penalty(c, b, x);
    ad::GradientMap grads = ad::backward(pen);

    for (net::Param* p : c.params()) {
      if (p->name.find("head") != std::string::npos) continue;  // no head in the score path
      net::Critic probe = c;
      net::Param* probe_p = nullptr;
      for (net::Param* q : probe.params())
        if (q->name == p->name) probe_p = q;
      auto f = [&](const Tensor& w) {
        probe_p->value = w;
        return penalty_value(probe);
      };
      CHECK(rel_err(grads.at(b.var(*p)), fd_grad(f, p->value)) < 1e-4);
    }
  }
}

TEST_CASE("cross entropy of uniform logits is log K") {
  Tape t;
  Var logits = t.leaf(Tensor::zeros({4, 5}));
  CHECK(aux_classification_loss(logits, {0, 1, 2, 3}).val().item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy vanishes as the correct margin grows") {
  Tape t;
  Tensor l({2, 3});
  l.at(0, 1) = 40.0;
  l.at(1, 2) = 40.0;
  CHECK(aux_classification_loss(t.leaf(l), {1, 2}).val().item() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross entropy matches an independent recomputation") {
  Rng rng(13);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor l = random_tensor({6, 4}, rng);
    std::vector<std::int64_t> y;
    for (int i = 0; i < 6; ++i) y.push_back(static_cast<std::int64_t>(rng.index(4)));
    double want = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      double z = 0;
      for (std::size_t c = 0; c < 4; ++c) z += std::exp(l.at(i, c));
      want += std::log(z) - l.at(i, static_cast<std::size_t>(y[i]));
    }
    want /= 6;
    Tape t;
    CHECK(aux_classification_loss(t.leaf(l), y).val().item() ==
          doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Tape t;
  Var logits = t.leaf(Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(aux_classification_loss(logits, {0, 3}), ContractError);
}

TEST_CASE("cross entropy decreases along the correct-class logit") {
  Tape t;
  Rng rng(14);
  Tensor base = random_tensor({3, 4}, rng);
  std::vector<std::int64_t> y{1, 0, 3};
  double prev = 1e300;
  for (double step = 0; step < 2.01; step += 0.25) {
    Tensor probe = base;
    for (std::size_t i = 0; i < 3; ++i)
      probe.at(i, static_cast<std::size_t>(y[i])) += step;
    const double v = aux_classification_loss(t.leaf(probe), y).val().item();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("first-order loss gradients match finite differences") {
  Rng rng(15);
  Tensor rv = random_tensor({5}, rng, 0.1, 0.9);
  Tensor fv = random_tensor({5}, rng, 0.1, 0.9);

  auto check = [&](auto&& loss_fn, const Tensor& at) {
    auto f = [&](const Tensor& x) {
      Tape t;
      return loss_fn(t.leaf(x, true)).val().item();
    };
    Tape t;
    Var x = t.leaf(at, true);
    Tensor got = ad::backward(loss_fn(x)).at(x);
    CHECK(rel_err(got, fd_grad(f, at)) < 1e-6);
  };
  check([](Var v) { return gan_generator_loss(v); }, fv);
  check([](Var v) { return generator_wgan_loss(v); }, fv);
  check([&](Var v) { return wgan_critic_core(v, v); }, rv);
}

TEST_CASE("loss breakdown totals satisfy the stated identity") {
  LossBreakdown b;
  b.critic_wasserstein = -1.25;
  b.gradient_penalty = 0.04;
  b.critic_aux = 0.8;
  b.generator_adversarial = 0.33;
  b.generator_aux = 0.9;
  b.finalize(10.0, 1.0, 0.5);
  CHECK(b.total_critic == doctest::Approx(-1.25 + 0.4 + 0.8).epsilon(1e-15));
  CHECK(b.total_generator == doctest::Approx(0.33 + 0.45).epsilon(1e-15));
}

TEST_SUITE_END();
