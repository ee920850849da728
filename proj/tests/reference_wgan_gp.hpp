#pragma once

// Straight-line unconditional WGAN-GP used as the independent reference for
// the baseline-reduction check. It shares the tensor primitives and seeds
// with the library but rebuilds the networks, batch norm, and training loop
// from scratch.

#include <cmath>
#include <vector>

#include "splitgan/autodiff.hpp"
#include "splitgan/config.hpp"
#include "splitgan/data.hpp"
#include "splitgan/losses.hpp"
#include "splitgan/networks.hpp"
#include "splitgan/rng.hpp"

namespace testutil {

using namespace splitgan;

struct ReferenceWganGp {
  std::vector<net::Param> gen_w, gen_b, gamma, beta, critic_w, critic_b;
  net::Param score_w, score_b;
  std::vector<Tensor> rmean, rvar;
  std::vector<std::size_t> gen_dims, critic_dims;
  double bn_eps = 1e-5, bn_momentum = 0.1, slope = 0.2;

  static Tensor he(std::size_t fin, std::size_t fout, double slope, Rng& rng) {
    Tensor w({fin, fout});
    const double std = std::sqrt(2.0 / ((1.0 + slope * slope) * double(fin)));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std * rng.normal();
    return w;
  }

  ReferenceWganGp(const run::TrainConfig& cfg, std::size_t data_dim) {
    Rng rng(cfg.seed_model);
    gen_dims = {cfg.latent_dim};
    for (std::size_t h : cfg.gen_hidden) gen_dims.push_back(h);
    gen_dims.push_back(data_dim);
    for (std::size_t l = 0; l + 1 < gen_dims.size(); ++l) {
      gen_w.emplace_back("gw" + std::to_string(l),
                         he(gen_dims[l], gen_dims[l + 1], slope, rng));
      gen_b.emplace_back("gb" + std::to_string(l), Tensor::zeros({gen_dims[l + 1]}));
      if (l + 2 < gen_dims.size()) {
        gamma.emplace_back("gamma" + std::to_string(l),
                           Tensor::full({gen_dims[l + 1]}, 1.0));
        beta.emplace_back("beta" + std::to_string(l), Tensor::zeros({gen_dims[l + 1]}));
        rmean.push_back(Tensor::zeros({gen_dims[l + 1]}));
        rvar.push_back(Tensor::full({gen_dims[l + 1]}, 1.0));
      }
    }
    critic_dims = {data_dim};
    for (std::size_t h : cfg.critic_hidden) critic_dims.push_back(h);
    for (std::size_t l = 0; l + 1 < critic_dims.size(); ++l) {
      critic_w.emplace_back("cw" + std::to_string(l),
                            he(critic_dims[l], critic_dims[l + 1], slope, rng));
      critic_b.emplace_back("cb" + std::to_string(l),
                            Tensor::zeros({critic_dims[l + 1]}));
    }
    score_w = net::Param("sw", he(critic_dims.back(), 1, slope, rng));
    score_b = net::Param("sb", Tensor::zeros({1}));
  }

  ad::Var gen_forward(ad::Tape& t, net::Binding& b, const ad::Var& z, bool update_stats) {
    ad::Var h = z;
    for (std::size_t l = 0; l + 1 < gen_dims.size(); ++l) {
      h = ad::affine(h, b.var(gen_w[l]), b.var(gen_b[l]));
      if (l + 2 < gen_dims.size()) {
        ad::Var mu = ad::colmean(h);
        ad::Var xc = ad::add_rowvec(h, ad::neg(mu));
        ad::Var var = ad::colmean(ad::square(xc));
        ad::Var istd = ad::div(t.constant(Tensor::full({gen_dims[l + 1]}, 1.0)),
                               ad::sqrt(ad::add_scalar(var, bn_eps)));
        ad::Var xn = ad::mul_rowvec(xc, istd);
        if (update_stats) {
          for (std::size_t i = 0; i < gen_dims[l + 1]; ++i) {
            rmean[l][i] = (1 - bn_momentum) * rmean[l][i] + bn_momentum * mu.val()[i];
            rvar[l][i] = (1 - bn_momentum) * rvar[l][i] + bn_momentum * var.val()[i];
          }
        }
        h = ad::add_rowvec(ad::mul_rowvec(xn, b.var(gamma[l])), b.var(beta[l]));
        h = ad::leaky_relu(h, slope);
      }
    }
    return h;
  }

  ad::Var critic_score(net::Binding& b, const ad::Var& x) {
    ad::Var h = x;
    for (std::size_t l = 0; l + 1 < critic_dims.size(); ++l) {
      h = ad::affine(h, b.var(critic_w[l]), b.var(critic_b[l]));
      h = ad::leaky_relu(h, slope);
    }
    return ad::reshape(ad::affine(h, b.var(score_w), b.var(score_b)), {x.val().dim(0)});
  }

  struct StepLosses {
    double core = 0, penalty = 0, adversarial = 0;
  };

  // One generator iteration (n_critic critic updates then a generator
  // update), drawing from `rng` in the library's documented order.
  StepLosses step(const run::TrainConfig& cfg, const data::LabeledDataset& ds, Rng& rng) {
    const std::size_t bsz = cfg.batch_size, n = ds.size(), d = ds.dim();
    net::LatentSampler latent{cfg.latent_dim, cfg.latent};
    StepLosses out;
    for (int k = 0; k < cfg.n_critic; ++k) {
      Tensor x_real({bsz, d});
      for (std::size_t i = 0; i < bsz; ++i) {
        const std::size_t idx = rng.index(n);
        for (std::size_t c = 0; c < d; ++c) x_real.at(i, c) = ds.points.at(idx, c);
      }
      Tensor z = latent.sample(bsz, rng);
      Tensor fake;
      {
        ad::Tape gt;
        net::Binding gb(gt, false);
        fake = gen_forward(gt, gb, gt.constant(z), true).val();
      }
      ad::Tape t;
      net::Binding cb(t, true);
      ad::Var real_score = critic_score(cb, t.constant(x_real));
      ad::Var fake_score = critic_score(cb, t.constant(fake));
      ad::Var core = loss::wgan_critic_core(real_score, fake_score);
      Tensor x_hat = loss::sample_interpolates(x_real, fake, rng);
      ad::Var xh = t.leaf(x_hat, true);
      ad::Var g = ad::grad_with_graph(ad::sum(critic_score(cb, xh)), xh);
      ad::Var gp = ad::mean(ad::square(ad::add_scalar(ad::l2_norm_rows(g), -1.0)));
      ad::Var total = ad::add(core, ad::scale(gp, cfg.lambda));
      out.core = core.val().item();
      out.penalty = gp.val().item();
      ad::GradientMap grads = ad::backward(total);
      for (auto* vecp : {&critic_w, &critic_b})
        for (net::Param& p : *vecp) p.adam_step(grads.at(cb.var(p)), cfg.adam);
      score_w.adam_step(grads.at(cb.var(score_w)), cfg.adam);
      score_b.adam_step(grads.at(cb.var(score_b)), cfg.adam);
    }
    Tensor z = latent.sample(bsz, rng);
    ad::Tape t;
    net::Binding gb(t, true);
    net::Binding cb(t, false);
    ad::Var fake = gen_forward(t, gb, t.constant(z), true);
    ad::Var adv = loss::generator_wgan_loss(critic_score(cb, fake));
    out.adversarial = adv.val().item();
    ad::GradientMap grads = ad::backward(adv);
    for (auto* vecp : {&gen_w, &gen_b, &gamma, &beta})
      for (net::Param& p : *vecp) p.adam_step(grads.at(gb.var(p)), cfg.adam);
    return out;
  }
};

}  // namespace testutil
