#include "splitgan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "splitgan/errors.hpp"

namespace splitgan::loss {

using ad::Var;

namespace {

constexpr double kProbGuard = 1e-12;

Var checked_prob_log(const Var& p, const char* who) {
  const Tensor& v = p.val();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0 || v[i] > 1.0)
      throw ContractError(std::string(who) + ": score " + std::to_string(v[i]) +
                          " outside [0,1]");
  }
  return ad::log(ad::clamp(p, kProbGuard, 1.0 - kProbGuard));
}

}  // namespace

Var gan_discriminator_loss(const Var& d_real, const Var& d_fake) {
  Var real_term = ad::mean(checked_prob_log(d_real, "gan_discriminator_loss"));
  Var fake_term = ad::mean(checked_prob_log(
      ad::add_scalar(ad::neg(d_fake), 1.0), "gan_discriminator_loss"));
  return ad::neg(ad::add(real_term, fake_term));
}

Var gan_generator_loss(const Var& d_fake) {
  return ad::neg(ad::mean(checked_prob_log(d_fake, "gan_generator_loss")));
}

Var wgan_critic_core(const Var& d_real, const Var& d_fake) {
  return ad::sub(ad::mean(d_fake), ad::mean(d_real));
}

Var generator_wgan_loss(const Var& d_fake) { return ad::neg(ad::mean(d_fake)); }

Tensor sample_interpolates(const Tensor& x_real, const Tensor& x_fake, Rng& rng) {
  if (!x_real.same_shape(x_fake))
    throw ShapeError("sample_interpolates: " + x_real.shape_str() + " vs " +
                     x_fake.shape_str());
  if (x_real.rank() != 2)
    throw ShapeError("sample_interpolates: expected rank-2 batch, got " +
                     x_real.shape_str());
  const std::size_t n = x_real.dim(0), d = x_real.dim(1);
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = rng.uniform01();
    for (std::size_t c = 0; c < d; ++c)
      out.at(i, c) = eps * x_real.at(i, c) + (1.0 - eps) * x_fake.at(i, c);
  }
  return out;
}

Var gradient_penalty(net::Critic& critic, net::Binding& b, const Tensor& x_hat) {
  if (x_hat.rank() != 2 || x_hat.dim(0) == 0)
    throw ContractError("gradient_penalty: need a non-empty rank-2 batch, got " +
                        x_hat.shape_str());
  Var xh = b.tape().leaf(x_hat, true);
  Var score = critic.score_only(b, xh);
  // The critic treats samples independently, so the gradient of the summed
  // score recovers each sample's own input gradient.
  Var g = ad::grad_with_graph(ad::sum(score), xh);
  Var norms = ad::l2_norm_rows(g);
  return ad::mean(ad::square(ad::add_scalar(norms, -1.0)));
}

Var aux_classification_loss(const Var& logits,
                            const std::vector<std::int64_t>& label_rows) {
  const Tensor& lv = logits.val();
  if (lv.rank() != 2)
    throw ShapeError("aux_classification_loss: logits must be rank-2, got " +
                     lv.shape_str());
  const std::size_t n = lv.dim(0), k = lv.dim(1);
  if (label_rows.size() != n)
    throw ContractError("aux_classification_loss: " + std::to_string(n) +
                        " rows vs " + std::to_string(label_rows.size()) + " labels");
  if (n == 0) throw ContractError("aux_classification_loss: empty batch");

  Tensor neg_rowmax({n});
  Tensor onehot({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    if (label_rows[i] < 0 || static_cast<std::size_t>(label_rows[i]) >= k)
      throw ContractError("aux_classification_loss: label row " +
                          std::to_string(label_rows[i]) + " outside " +
                          std::to_string(k) + " classes");
    double mx = lv.at(i, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, lv.at(i, c));
    neg_rowmax[i] = -mx;
    onehot.at(i, static_cast<std::size_t>(label_rows[i])) = 1.0;
  }
  ad::Tape& t = *logits.tape();
  // Max-shift is a constant, so it cancels exactly in the softmax.
  Var shifted = ad::add_colvec(logits, t.constant(std::move(neg_rowmax)));
  Var log_z = ad::log(ad::rowsum(ad::exp(shifted)));
  Var correct = ad::rowsum(ad::mul(shifted, t.constant(std::move(onehot))));
  return ad::mean(ad::sub(log_z, correct));
}

}  // namespace splitgan::loss
