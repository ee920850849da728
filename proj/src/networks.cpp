#include "splitgan/networks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "splitgan/errors.hpp"

namespace splitgan::net {

using ad::Tape;
using ad::Var;

// ------------------------------------------------------------------ params

Param::Param(std::string n, Tensor init)
    : name(std::move(n)),
      value(std::move(init)),
      m(Tensor::zeros(value.shape())),
      v(Tensor::zeros(value.shape())) {}

void Param::adam_step(const Tensor& grad, const AdamConfig& cfg) {
  if (!grad.same_shape(value))
    throw ShapeError("adam: gradient " + grad.shape_str() + " vs parameter " +
                     value.shape_str() + " (" + name + ")");
  ++steps;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps));
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Var Binding::var(Param& p) {
  auto it = mounted_.find(&p);
  if (it != mounted_.end()) return it->second;
  Var v = tape_->leaf(p.value, with_grad_);
  mounted_.emplace(&p, v);
  return v;
}

// ---------------------------------------------------------------- classes

ClassIndex::ClassIndex(std::vector<std::int32_t> sorted_ids) : ids_(std::move(sorted_ids)) {
  if (!std::is_sorted(ids_.begin(), ids_.end()))
    std::sort(ids_.begin(), ids_.end());
  if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
    throw ContractError("class index: duplicate class id");
}

std::size_t ClassIndex::row_of(std::int32_t id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id)
    throw ContractError("class " + std::to_string(id) + " is not an active leaf");
  return static_cast<std::size_t>(it - ids_.begin());
}

bool ClassIndex::active(std::int32_t id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::pair<ClassIndex, std::vector<RowPlan>> plan_split_rows(const ClassIndex& index,
                                                            const SplitPlan& splits) {
  std::set<std::int32_t> parents;
  std::vector<std::pair<std::int32_t, RowPlan>> next;  // (new id, recipe)
  for (const ClassSplit& s : splits) {
    if (!index.active(s.parent))
      throw ContractError("split: parent class " + std::to_string(s.parent) +
                          " is not an active leaf");
    if (!parents.insert(s.parent).second)
      throw ContractError("split: parent class " + std::to_string(s.parent) +
                          " listed twice");
    const std::size_t prow = index.row_of(s.parent);
    for (std::int32_t child : s.children) {
      if (index.active(child))
        throw ContractError("split: child id " + std::to_string(child) +
                            " already active");
      next.emplace_back(child, RowPlan{prow, true});
    }
  }
  for (std::size_t row = 0; row < index.count(); ++row) {
    const std::int32_t id = index.id_of(row);
    if (!parents.count(id)) next.emplace_back(id, RowPlan{row, false});
  }
  std::sort(next.begin(), next.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::int32_t> ids;
  std::vector<RowPlan> plan;
  ids.reserve(next.size());
  plan.reserve(next.size());
  for (auto& [id, rp] : next) {
    ids.push_back(id);
    plan.push_back(rp);
  }
  return {ClassIndex(std::move(ids)), std::move(plan)};
}

// ------------------------------------------------------- conditional norm

ConditionalNorm::ConditionalNorm(const std::string& prefix, std::size_t classes,
                                 std::size_t features)
    : gamma_base(Tensor::full({classes, features}, 1.0)),
      beta_base(Tensor::zeros({classes, features})),
      delta_gamma(prefix + ".dgamma", Tensor::zeros({classes, features})),
      delta_beta(prefix + ".dbeta", Tensor::zeros({classes, features})),
      running_mean(Tensor::zeros({features})),
      running_var(Tensor::full({features}, 1.0)) {}

Var ConditionalNorm::forward(Binding& b, const Var& x, const std::vector<std::int64_t>& rows,
                             bool training, bool update_stats) {
  Tape& t = b.tape();
  const std::size_t f = features();
  Var xn;
  if (training) {
    Var mu = ad::colmean(x);
    Var xc = ad::add_rowvec(x, ad::neg(mu));
    Var var = ad::colmean(ad::square(xc));
    Var istd = ad::div(t.constant(Tensor::full({f}, 1.0)),
                       ad::sqrt(ad::add_scalar(var, eps)));
    xn = ad::mul_rowvec(xc, istd);
    if (update_stats) {
      const Tensor& muv = mu.val();
      const Tensor& varv = var.val();
      for (std::size_t i = 0; i < f; ++i) {
        running_mean[i] = (1.0 - momentum) * running_mean[i] + momentum * muv[i];
        running_var[i] = (1.0 - momentum) * running_var[i] + momentum * varv[i];
      }
    }
  } else {
    Tensor neg_mu({f});
    Tensor istd({f});
    for (std::size_t i = 0; i < f; ++i) {
      neg_mu[i] = -running_mean[i];
      istd[i] = 1.0 / std::sqrt(running_var[i] + eps);
    }
    xn = ad::mul_rowvec(ad::add_rowvec(x, t.constant(std::move(neg_mu))),
                        t.constant(std::move(istd)));
  }
  Var gain = ad::index_select(ad::add(t.constant(gamma_base), b.var(delta_gamma)), rows);
  Var bias = ad::index_select(ad::add(t.constant(beta_base), b.var(delta_beta)), rows);
  return ad::add(ad::mul(xn, gain), bias);
}

void ConditionalNorm::apply_rows(const std::vector<RowPlan>& plan) {
  const std::size_t f = features();
  const std::size_t k_new = plan.size();
  Tensor gb({k_new, f}), bb({k_new, f});
  Tensor dg({k_new, f}), db({k_new, f});
  Tensor mg({k_new, f}), vg({k_new, f}), mb({k_new, f}), vb({k_new, f});
  for (std::size_t r = 0; r < k_new; ++r) {
    const RowPlan& rp = plan[r];
    for (std::size_t c = 0; c < f; ++c) {
      if (rp.is_child) {
        // Effective parent parameters become the child's frozen base.
        gb.at(r, c) = gamma_base.at(rp.old_row, c) + delta_gamma.value.at(rp.old_row, c);
        bb.at(r, c) = beta_base.at(rp.old_row, c) + delta_beta.value.at(rp.old_row, c);
      } else {
        gb.at(r, c) = gamma_base.at(rp.old_row, c);
        bb.at(r, c) = beta_base.at(rp.old_row, c);
        dg.at(r, c) = delta_gamma.value.at(rp.old_row, c);
        db.at(r, c) = delta_beta.value.at(rp.old_row, c);
        mg.at(r, c) = delta_gamma.m.at(rp.old_row, c);
        vg.at(r, c) = delta_gamma.v.at(rp.old_row, c);
        mb.at(r, c) = delta_beta.m.at(rp.old_row, c);
        vb.at(r, c) = delta_beta.v.at(rp.old_row, c);
      }
    }
  }
  gamma_base = std::move(gb);
  beta_base = std::move(bb);
  delta_gamma.value = std::move(dg);
  delta_gamma.m = std::move(mg);
  delta_gamma.v = std::move(vg);
  delta_beta.value = std::move(db);
  delta_beta.m = std::move(mb);
  delta_beta.v = std::move(vb);
}

// --------------------------------------------------------------- networks

namespace {

Tensor he_init(std::size_t fan_in, std::size_t fan_out, double slope, Rng& rng) {
  const double std = std::sqrt(2.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
  Tensor w({fan_in, fan_out});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std * rng.normal();
  return w;
}

std::vector<std::int32_t> iota_ids(std::size_t n) {
  std::vector<std::int32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int32_t>(i);
  return ids;
}

}  // namespace

Generator::Generator(const GeneratorConfig& cfg, std::size_t n_classes, Rng& init_rng)
    : cfg_(cfg), classes_(iota_ids(n_classes)) {
  if (n_classes == 0) throw ContractError("generator: need at least one class");
  if (cfg.hidden.empty()) throw ContractError("generator: need at least one hidden layer");
  std::size_t in = cfg.latent_dim;
  for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
    weights_.emplace_back("gen.w" + std::to_string(l),
                          he_init(in, cfg.hidden[l], cfg.leaky_slope, init_rng));
    biases_.emplace_back("gen.b" + std::to_string(l), Tensor::zeros({cfg.hidden[l]}));
    norms_.emplace_back("gen.norm" + std::to_string(l), n_classes, cfg.hidden[l]);
    in = cfg.hidden[l];
  }
  const std::size_t out_l = cfg.hidden.size();
  weights_.emplace_back("gen.w" + std::to_string(out_l),
                        he_init(in, cfg.out_dim, cfg.leaky_slope, init_rng));
  biases_.emplace_back("gen.b" + std::to_string(out_l), Tensor::zeros({cfg.out_dim}));
}

Var Generator::forward(Binding& b, const Var& z, const std::vector<std::int32_t>& class_ids,
                       bool training, bool update_stats) {
  const Tensor& zv = z.val();
  if (zv.rank() != 2 || zv.dim(1) != cfg_.latent_dim)
    throw ShapeError("generator: latent batch " + zv.shape_str() + " vs latent dim " +
                     std::to_string(cfg_.latent_dim));
  if (class_ids.size() != zv.dim(0))
    throw ContractError("generator: " + std::to_string(zv.dim(0)) + " latents vs " +
                        std::to_string(class_ids.size()) + " class ids");
  std::vector<std::int64_t> rows(class_ids.size());
  for (std::size_t i = 0; i < class_ids.size(); ++i)
    rows[i] = static_cast<std::int64_t>(classes_.row_of(class_ids[i]));

  Var h = z;
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    h = ad::affine(h, b.var(weights_[l]), b.var(biases_[l]));
    h = norms_[l].forward(b, h, rows, training, update_stats);
    h = ad::leaky_relu(h, cfg_.leaky_slope);
  }
  const std::size_t out_l = cfg_.hidden.size();
  return ad::affine(h, b.var(weights_[out_l]), b.var(biases_[out_l]));
}

Tensor Generator::generate(const Tensor& z, const std::vector<std::int32_t>& class_ids,
                           bool training) {
  if (z.rank() != 2 || z.dim(1) != cfg_.latent_dim)
    throw ShapeError("generate: latent batch " + z.shape_str() + " vs latent dim " +
                     std::to_string(cfg_.latent_dim));
  if (z.dim(0) != class_ids.size())
    throw ContractError("generate: batch sizes differ");
  for (std::int32_t id : class_ids) (void)classes_.row_of(id);  // validate early
  if (z.dim(0) == 0) return Tensor({0, cfg_.out_dim});
  Tape t;
  Binding b(t, false);
  return forward(b, t.constant(z), class_ids, training, false).val();
}

void Generator::split_norm_params(const SplitPlan& splits) {
  auto [idx, plan] = plan_split_rows(classes_, splits);
  for (ConditionalNorm& n : norms_) n.apply_rows(plan);
  classes_ = std::move(idx);
}

std::vector<Param*> Generator::params() {
  std::vector<Param*> out;
  for (Param& p : weights_) out.push_back(&p);
  for (Param& p : biases_) out.push_back(&p);
  for (ConditionalNorm& n : norms_) {
    out.push_back(&n.delta_gamma);
    out.push_back(&n.delta_beta);
  }
  return out;
}

Critic::Critic(const CriticConfig& cfg, std::size_t n_classes, Rng& init_rng)
    : cfg_(cfg), classes_(iota_ids(n_classes)) {
  if (n_classes == 0) throw ContractError("critic: need at least one class");
  if (cfg.hidden.empty()) throw ContractError("critic: need at least one hidden layer");
  std::size_t in = cfg.in_dim;
  for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
    weights_.emplace_back("critic.w" + std::to_string(l),
                          he_init(in, cfg.hidden[l], cfg.leaky_slope, init_rng));
    biases_.emplace_back("critic.b" + std::to_string(l), Tensor::zeros({cfg.hidden[l]}));
    in = cfg.hidden[l];
  }
  score_w_ = Param("critic.score_w", he_init(in, 1, cfg.leaky_slope, init_rng));
  score_b_ = Param("critic.score_b", Tensor::zeros({1}));
  // Head stored one row per class so split-time row copies stay contiguous.
  Tensor hw = he_init(in, n_classes, cfg.leaky_slope, init_rng);
  Tensor hw_rows({n_classes, in});
  for (std::size_t r = 0; r < n_classes; ++r)
    for (std::size_t c = 0; c < in; ++c) hw_rows.at(r, c) = hw.at(c, r);
  head_w_ = Param("critic.head_w", std::move(hw_rows));
  head_b_ = Param("critic.head_b", Tensor::zeros({n_classes}));
}

CriticOut Critic::criticize(Binding& b, const Var& x) {
  const Tensor& xv = x.val();
  if (xv.rank() != 2 || xv.dim(1) != cfg_.in_dim)
    throw ShapeError("criticize: batch " + xv.shape_str() + " vs input dim " +
                     std::to_string(cfg_.in_dim));
  Var h = x;
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    h = ad::affine(h, b.var(weights_[l]), b.var(biases_[l]));
    h = ad::leaky_relu(h, cfg_.leaky_slope);
  }
  Var score = ad::reshape(ad::affine(h, b.var(score_w_), b.var(score_b_)), {xv.dim(0)});
  Var logits = ad::affine(h, ad::transpose(b.var(head_w_)), b.var(head_b_));
  return CriticOut{score, logits, h};
}

Var Critic::score_only(Binding& b, const Var& x) {
  const Tensor& xv = x.val();
  if (xv.rank() != 2 || xv.dim(1) != cfg_.in_dim)
    throw ShapeError("score_only: batch " + xv.shape_str() + " vs input dim " +
                     std::to_string(cfg_.in_dim));
  Var h = x;
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    h = ad::affine(h, b.var(weights_[l]), b.var(biases_[l]));
    h = ad::leaky_relu(h, cfg_.leaky_slope);
  }
  return ad::reshape(ad::affine(h, b.var(score_w_), b.var(score_b_)), {xv.dim(0)});
}

Tensor Critic::features_values(const Tensor& x) {
  Tape t;
  Binding b(t, false);
  CriticOut out = criticize(b, t.constant(x));
  return out.features.val();
}

std::pair<Tensor, Tensor> Critic::score_logits_values(const Tensor& x) {
  Tape t;
  Binding b(t, false);
  CriticOut out = criticize(b, t.constant(x));
  return {out.score.val(), out.logits.val()};
}

void Critic::extend_classifier_head(const SplitPlan& splits) {
  auto [idx, plan] = plan_split_rows(classes_, splits);
  const std::size_t h = feature_width();
  const std::size_t k_new = plan.size();
  Tensor w({k_new, h}), bi({k_new});
  Tensor mw({k_new, h}), vw({k_new, h}), mb({k_new}), vb({k_new});
  for (std::size_t r = 0; r < k_new; ++r) {
    const RowPlan& rp = plan[r];
    for (std::size_t c = 0; c < h; ++c) {
      w.at(r, c) = head_w_.value.at(rp.old_row, c);
      if (!rp.is_child) {
        mw.at(r, c) = head_w_.m.at(rp.old_row, c);
        vw.at(r, c) = head_w_.v.at(rp.old_row, c);
      }
    }
    bi[r] = head_b_.value[rp.old_row];
    if (!rp.is_child) {
      mb[r] = head_b_.m[rp.old_row];
      vb[r] = head_b_.v[rp.old_row];
    }
  }
  head_w_.value = std::move(w);
  head_w_.m = std::move(mw);
  head_w_.v = std::move(vw);
  head_b_.value = std::move(bi);
  head_b_.m = std::move(mb);
  head_b_.v = std::move(vb);
  classes_ = std::move(idx);
}

std::vector<Param*> Critic::params() {
  std::vector<Param*> out;
  for (Param& p : weights_) out.push_back(&p);
  for (Param& p : biases_) out.push_back(&p);
  out.push_back(&score_w_);
  out.push_back(&score_b_);
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

// ---------------------------------------------------------------- latents

Tensor LatentSampler::sample(std::size_t n, Rng& rng) const {
  Tensor z({n, dim});
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = kind == LatentKind::Uniform ? rng.uniform(-1.0, 1.0) : rng.normal();
  return z;
}

LatentKind latent_kind_from_string(const std::string& s) {
  if (s == "uniform") return LatentKind::Uniform;
  if (s == "normal") return LatentKind::Normal;
  throw ConfigError("latent kind must be 'uniform' or 'normal', got '" + s + "'");
}

std::string to_string(LatentKind k) {
  return k == LatentKind::Uniform ? "uniform" : "normal";
}

}  // namespace splitgan::net
