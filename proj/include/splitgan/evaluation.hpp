#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitgan/data.hpp"
#include "splitgan/networks.hpp"
#include "splitgan/tensor.hpp"

namespace splitgan::eval {

/// Frozen MLP trained on ground-truth mode ids; the scoring stand-in for a
/// large pretrained classifier. Aborts construction if it cannot reach 99%
/// accuracy on its own training set.
class OracleClassifier {
 public:
  OracleClassifier() = default;

  Tensor posteriors(const Tensor& samples) const;  // [n, modes], softmax rows
  std::size_t mode_count() const { return classes_; }
  double training_accuracy() const { return train_accuracy_; }

  friend OracleClassifier train_oracle(const data::LabeledDataset& ds, std::uint64_t seed);

 private:
  std::vector<Tensor> w_, b_;
  std::size_t classes_ = 0;
  double train_accuracy_ = 0.0;
};

OracleClassifier train_oracle(const data::LabeledDataset& ds, std::uint64_t seed = 17);

/// exp(mean_i KL(p(y|x_i) || p(y))) from a row-stochastic posterior matrix.
/// Zero entries contribute nothing; the marginal is clamped at 1e-12.
double inception_score_from_posteriors(const Tensor& posteriors);

/// Same score plus the sample standard deviation over `folds` contiguous
/// splits, the usual +/- convention.
std::pair<double, double> inception_score_with_spread(const Tensor& posteriors,
                                                      int folds = 10);

double proxy_inception_score(const Tensor& samples, const OracleClassifier& oracle);

struct ModeMetrics {
  std::size_t modes_covered = 0;
  double high_quality_fraction = 0.0;
  std::vector<std::size_t> histogram;  // high-quality samples per nearest mode
};

/// A sample is high quality when it lies within radius_sigmas * sigma of its
/// nearest mode center; a mode counts as covered once it holds at least
/// max(1, 0.2 * n / K) high-quality samples.
ModeMetrics mode_metrics(const Tensor& samples, const data::ModeSpec& modes,
                         double radius_sigmas = 3.0);

struct EvalReport {
  std::int64_t iteration = 0;
  double proxy_score = 0.0;
  double score_stderr = 0.0;
  std::size_t modes_covered = 0;
  double high_quality_fraction = 0.0;
  std::vector<std::size_t> histogram;

  static std::string csv_header();
  std::string csv_row() const;
};

struct SampleBatch {
  Tensor points;
  std::vector<std::int32_t> labels;  // conditioning class per sample
};

/// Inference-mode draws with class ids from `class_pool` (uniform when
/// `class_weights` is empty, else proportional). Deterministic given seed.
SampleBatch draw_samples(net::Generator& gen, const net::LatentSampler& latent,
                         std::size_t n, const std::vector<std::int32_t>& class_pool,
                         const std::vector<double>& class_weights, std::uint64_t seed);

EvalReport evaluate_model(net::Generator& gen, const net::LatentSampler& latent,
                          const OracleClassifier& oracle, const data::ModeSpec& modes,
                          std::size_t n_samples, std::uint64_t seed,
                          std::int64_t iteration,
                          const std::vector<double>& class_weights = {});

struct BestSelection {
  std::string path;
  std::int64_t iteration = -1;
  double selection_score = 0.0;
  double final_score = 0.0;  // recomputed on a fresh sample of the winner
  double final_stderr = 0.0;
};

/// Scan periodic checkpoints, score each with fresh samples, keep the argmax,
/// then re-score the winner on another fresh sample.
BestSelection select_best_model(const std::vector<std::string>& checkpoint_paths,
                                const OracleClassifier& oracle,
                                std::size_t n_eval_samples, std::uint64_t seed);

}  // namespace splitgan::eval
