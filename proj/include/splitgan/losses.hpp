#pragma once

#include <cstdint>
#include <vector>

#include "splitgan/autodiff.hpp"
#include "splitgan/networks.hpp"
#include "splitgan/rng.hpp"
#include "splitgan/tensor.hpp"

namespace splitgan::loss {

/// Per-step objective values. Totals satisfy
///   total_critic    = critic_wasserstein + lambda * gradient_penalty + alpha_d * critic_aux
///   total_generator = generator_adversarial + alpha_g * generator_aux
struct LossBreakdown {
  double critic_wasserstein = 0.0;
  double gradient_penalty = 0.0;
  double critic_aux = 0.0;
  double generator_adversarial = 0.0;
  double generator_aux = 0.0;
  double total_critic = 0.0;
  double total_generator = 0.0;

  void finalize(double lambda, double alpha_d, double alpha_g) {
    total_critic = critic_wasserstein + lambda * gradient_penalty + alpha_d * critic_aux;
    total_generator = generator_adversarial + alpha_g * generator_aux;
  }
};

/// -mean(log d_real) - mean(log(1 - d_fake)). Inputs are probabilities from a
/// sigmoid head; values are clamped 1e-12 away from the boundaries before the
/// log, and anything outside [0,1] is a contract violation.
ad::Var gan_discriminator_loss(const ad::Var& d_real, const ad::Var& d_fake);

/// -mean(log d_fake), same clamping.
ad::Var gan_generator_loss(const ad::Var& d_fake);

/// mean(d_fake) - mean(d_real) on unbounded critic scores.
ad::Var wgan_critic_core(const ad::Var& d_real, const ad::Var& d_fake);

/// -mean(d_fake): the generator climbs the critic's score.
ad::Var generator_wgan_loss(const ad::Var& d_fake);

/// Points on straight lines between paired samples, one uniform epsilon per
/// sample.
Tensor sample_interpolates(const Tensor& x_real, const Tensor& x_fake, Rng& rng);

/// mean((||grad_x D(x_hat)|| - 1)^2) over the batch, without the lambda
/// factor. Differentiable w.r.t. critic parameters through the inner
/// gradient.
ad::Var gradient_penalty(net::Critic& critic, net::Binding& b, const Tensor& x_hat);

/// Mean softmax cross-entropy. Labels are table rows in [0, K).
ad::Var aux_classification_loss(const ad::Var& logits,
                                const std::vector<std::int64_t>& label_rows);

}  // namespace splitgan::loss
