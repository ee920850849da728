#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "splitgan/autodiff.hpp"
#include "splitgan/rng.hpp"
#include "splitgan/tensor.hpp"

namespace splitgan::net {

// ------------------------------------------------------------------ params

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

/// Trainable tensor with its optimizer slots. Checkpoints persist all of it.
struct Param {
  std::string name;
  Tensor value;
  Tensor m, v;            // Adam first/second moment estimates
  std::int64_t steps = 0;

  Param() = default;
  Param(std::string n, Tensor init);
  void adam_step(const Tensor& grad, const AdamConfig& cfg);
};

/// One training step's view of a model: parameters mounted as tape leaves.
/// Bindings never outlive their tape or the step that created them.
class Binding {
 public:
  Binding(ad::Tape& tape, bool with_grad) : tape_(&tape), with_grad_(with_grad) {}

  ad::Var var(Param& p);
  ad::Tape& tape() { return *tape_; }
  bool with_grad() const { return with_grad_; }

 private:
  ad::Tape* tape_;
  bool with_grad_;
  std::unordered_map<const Param*, ad::Var> mounted_;
};

// ---------------------------------------------------------------- classes

/// Sorted active class ids; a class's table row is its position here.
class ClassIndex {
 public:
  ClassIndex() = default;
  explicit ClassIndex(std::vector<std::int32_t> sorted_ids);

  std::size_t count() const { return ids_.size(); }
  std::size_t row_of(std::int32_t id) const;  // ContractError when inactive
  std::int32_t id_of(std::size_t row) const { return ids_[row]; }
  bool active(std::int32_t id) const;
  const std::vector<std::int32_t>& ids() const { return ids_; }

 private:
  std::vector<std::int32_t> ids_;
};

struct ClassSplit {
  std::int32_t parent;
  std::array<std::int32_t, 2> children;
};
using SplitPlan = std::vector<ClassSplit>;

/// Row-level recipe for growing per-class tables: each new row either carries
/// an existing row or is a fresh child initialized from its parent's row.
struct RowPlan {
  std::size_t old_row;
  bool is_child;
};

/// New sorted id list plus per-row plan for applying `splits` to `index`.
std::pair<ClassIndex, std::vector<RowPlan>> plan_split_rows(const ClassIndex& index,
                                                            const SplitPlan& splits);

// ------------------------------------------------------- conditional norm

/// Batch normalization whose gain and bias depend on the class id. Statistics
/// are shared across classes; only gamma/beta are conditional. Children store
/// a frozen copy of the parent's effective parameters plus a trainable delta
/// starting at zero, so a split does not change the forward map.
class ConditionalNorm {
 public:
  ConditionalNorm() = default;
  ConditionalNorm(const std::string& prefix, std::size_t classes, std::size_t features);

  ad::Var forward(Binding& b, const ad::Var& x, const std::vector<std::int64_t>& rows,
                  bool training, bool update_stats);
  void apply_rows(const std::vector<RowPlan>& plan);

  std::size_t classes() const { return gamma_base.dim(0); }
  std::size_t features() const { return gamma_base.dim(1); }

  Tensor gamma_base, beta_base;      // [K,F], frozen at class creation
  Param delta_gamma, delta_beta;     // [K,F], trainable drift
  Tensor running_mean, running_var;  // [F]
  double momentum = 0.1;
  double eps = 1e-5;
};

// --------------------------------------------------------------- generator

struct GeneratorConfig {
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t out_dim = 2;
  double leaky_slope = 0.2;
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, std::size_t n_classes, Rng& init_rng);

  /// Traced forward. `class_ids` must be active leaves; batch sizes match.
  ad::Var forward(Binding& b, const ad::Var& z, const std::vector<std::int32_t>& class_ids,
                  bool training, bool update_stats);

  /// Value-level convenience on a throwaway tape (no stat updates).
  Tensor generate(const Tensor& z, const std::vector<std::int32_t>& class_ids,
                  bool training = false);

  /// Grow every conditional-norm table: children inherit the parent's
  /// effective gain/bias with fresh zero deltas.
  void split_norm_params(const SplitPlan& splits);

  std::vector<Param*> params();
  std::vector<ConditionalNorm>& norms() { return norms_; }
  const std::vector<ConditionalNorm>& norms() const { return norms_; }
  const ClassIndex& class_index() const { return classes_; }
  const GeneratorConfig& config() const { return cfg_; }
  void set_class_index(ClassIndex idx) { classes_ = std::move(idx); }

  std::vector<Param> weights_, biases_;  // exposed for checkpointing

 private:
  GeneratorConfig cfg_;
  std::vector<ConditionalNorm> norms_;
  ClassIndex classes_;
};

// ------------------------------------------------------------------ critic

struct CriticConfig {
  std::size_t in_dim = 2;
  std::vector<std::size_t> hidden = {128, 128, 128};
  double leaky_slope = 0.2;
};

struct CriticOut {
  ad::Var score;     // [B], unbounded; squash only in the classic-GAN loss path
  ad::Var logits;    // [B,K]
  ad::Var features;  // [B,H], last hidden layer
};

/// Trunk shared by the scalar critic head and the per-class classifier head.
/// No normalization layers: the penalty term needs per-sample gradients.
class Critic {
 public:
  Critic() = default;
  Critic(const CriticConfig& cfg, std::size_t n_classes, Rng& init_rng);

  CriticOut criticize(Binding& b, const ad::Var& x);
  /// Scalar head only; the penalty path has no use for the logits.
  ad::Var score_only(Binding& b, const ad::Var& x);

  /// Last-hidden-layer activations, inference only.
  Tensor features_values(const Tensor& x);
  /// Scores + logits at value level (for evaluation paths).
  std::pair<Tensor, Tensor> score_logits_values(const Tensor& x);

  /// Add one classifier-head row per child, copying the parent's row, and
  /// retire the parent rows.
  void extend_classifier_head(const SplitPlan& splits);

  std::vector<Param*> params();
  const ClassIndex& class_index() const { return classes_; }
  const CriticConfig& config() const { return cfg_; }
  std::size_t feature_width() const { return cfg_.hidden.back(); }
  void set_class_index(ClassIndex idx) { classes_ = std::move(idx); }

  std::vector<Param> weights_, biases_;  // trunk
  Param score_w_, score_b_;
  Param head_w_, head_b_;  // [K,H], [K]: one row per active class

 private:
  CriticConfig cfg_;
  ClassIndex classes_;
};

// ---------------------------------------------------------------- latents

enum class LatentKind { Uniform, Normal };  // uniform[-1,1] or standard normal

struct LatentSampler {
  std::size_t dim = 8;
  LatentKind kind = LatentKind::Normal;

  /// [n, dim] batch drawn from the given stream.
  Tensor sample(std::size_t n, Rng& rng) const;
};

LatentKind latent_kind_from_string(const std::string& s);
std::string to_string(LatentKind k);

}  // namespace splitgan::net
