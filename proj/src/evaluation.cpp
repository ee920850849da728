#include "splitgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "splitgan/autodiff.hpp"
#include "splitgan/checkpoint.hpp"
#include "splitgan/errors.hpp"
#include "splitgan/losses.hpp"
#include "splitgan/rng.hpp"

namespace splitgan::eval {

namespace {
constexpr double kProbFloor = 1e-12;
}

// ------------------------------------------------------------------ oracle

Tensor OracleClassifier::posteriors(const Tensor& samples) const {
  if (classes_ == 0) throw ContractError("oracle: not trained");
  if (samples.rank() != 2 || samples.dim(1) != w_.front().dim(0))
    throw ShapeError("oracle: samples " + samples.shape_str() + " vs input dim " +
                     std::to_string(w_.front().dim(0)));
  const std::size_t n = samples.dim(0);
  Tensor out({n, classes_});
  const std::size_t chunk = 2048;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t stop = std::min(n, start + chunk);
    Tensor x({stop - start, samples.dim(1)});
    std::copy(samples.data() + start * samples.dim(1),
              samples.data() + stop * samples.dim(1), x.data());
    ad::Tape t;
    ad::Var h = t.constant(std::move(x));
    for (std::size_t l = 0; l < w_.size(); ++l) {
      h = ad::affine(h, t.constant(w_[l]), t.constant(b_[l]));
      if (l + 1 < w_.size()) h = ad::leaky_relu(h, 0.2);
    }
    const Tensor& logits = h.val();
    for (std::size_t i = 0; i < logits.dim(0); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes_; ++c) mx = std::max(mx, logits.at(i, c));
      double z = 0;
      for (std::size_t c = 0; c < classes_; ++c) z += std::exp(logits.at(i, c) - mx);
      for (std::size_t c = 0; c < classes_; ++c)
        out.at(start + i, c) = std::exp(logits.at(i, c) - mx) / z;
    }
  }
  return out;
}

OracleClassifier train_oracle(const data::LabeledDataset& ds, std::uint64_t seed) {
  std::set<std::int32_t> modes(ds.mode_ids.begin(), ds.mode_ids.end());
  if (modes.size() < 2)
    throw ContractError("train_oracle: dataset has fewer than 2 modes");
  const std::size_t m = ds.modes.count() ? ds.modes.count() : modes.size();
  const std::size_t n = ds.size(), d = ds.dim();

  OracleClassifier oracle;
  oracle.classes_ = m;
  Rng rng(seed);
  const std::vector<std::size_t> dims = {d, 64, 64, m};
  std::vector<net::Param> params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Tensor w({dims[l], dims[l + 1]});
    const double std = std::sqrt(2.0 / static_cast<double>(dims[l]));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std * rng.normal();
    params.emplace_back("w" + std::to_string(l), std::move(w));
    params.emplace_back("b" + std::to_string(l), Tensor::zeros({dims[l + 1]}));
  }

  net::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  const std::size_t batch = std::min<std::size_t>(128, n);
  const int max_steps = 4000;

  auto full_accuracy = [&]() {
    OracleClassifier probe;
    probe.classes_ = m;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      probe.w_.push_back(params[2 * l].value);
      probe.b_.push_back(params[2 * l + 1].value);
    }
    Tensor post = probe.posteriors(ds.points);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      for (std::size_t c = 1; c < m; ++c)
        if (post.at(i, c) > post.at(i, arg)) arg = c;
      hits += (static_cast<std::int32_t>(arg) == ds.mode_ids[i]);
    }
    return static_cast<double>(hits) / static_cast<double>(n);
  };

  double acc = 0;
  for (int step = 1; step <= max_steps; ++step) {
    Tensor x({batch, d});
    std::vector<std::int64_t> y(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t idx = rng.index(n);
      for (std::size_t c = 0; c < d; ++c) x.at(i, c) = ds.points.at(idx, c);
      y[i] = ds.mode_ids[idx];
    }
    ad::Tape t;
    net::Binding bind(t, true);
    ad::Var h = t.constant(std::move(x));
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      h = ad::affine(h, bind.var(params[2 * l]), bind.var(params[2 * l + 1]));
      if (l + 2 < dims.size()) h = ad::leaky_relu(h, 0.2);
    }
    ad::Var ce = loss::aux_classification_loss(h, y);
    ad::GradientMap grads = ad::backward(ce);
    for (net::Param& p : params) p.adam_step(grads.at(bind.var(p)), adam);

    if (step % 250 == 0) {
      acc = full_accuracy();
      if (acc >= 0.995) break;
    }
  }
  if (acc < 0.995) acc = full_accuracy();
  if (acc < 0.99)
    throw OracleQualityError("oracle reached only " + std::to_string(acc * 100.0) +
                             "% training accuracy; dataset modes may overlap");
  oracle.train_accuracy_ = acc;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    oracle.w_.push_back(std::move(params[2 * l].value));
    oracle.b_.push_back(std::move(params[2 * l + 1].value));
  }
  return oracle;
}

// ------------------------------------------------------------------- score

double inception_score_from_posteriors(const Tensor& post) {
  if (post.rank() != 2 || post.dim(0) == 0)
    throw ContractError("inception score: need a non-empty posterior matrix");
  const std::size_t n = post.dim(0), k = post.dim(1);
  // Means are taken relative to the first row, so a stack of identical rows
  // averages to itself bit-for-bit and KL(p || p) is an exact zero.
  std::vector<double> marginal(k);
  for (std::size_t c = 0; c < k; ++c) {
    double delta = 0;
    for (std::size_t i = 0; i < n; ++i) delta += post.at(i, c) - post.at(0, c);
    marginal[c] = std::max(post.at(0, c) + delta / static_cast<double>(n), kProbFloor);
  }

  auto sample_kl = [&](std::size_t i) {
    double kl = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = post.at(i, c);
      if (p > 0) kl += p * (std::log(p) - std::log(marginal[c]));
    }
    return kl;
  };
  const double kl0 = sample_kl(0);
  double delta = 0;
  for (std::size_t i = 0; i < n; ++i) delta += sample_kl(i) - kl0;
  return std::exp(kl0 + delta / static_cast<double>(n));
}

std::pair<double, double> inception_score_with_spread(const Tensor& post, int folds) {
  const double score = inception_score_from_posteriors(post);
  const std::size_t n = post.dim(0), k = post.dim(1);
  if (folds < 2 || n < static_cast<std::size_t>(folds)) return {score, 0.0};
  std::vector<double> fold_scores;
  for (int f = 0; f < folds; ++f) {
    const std::size_t lo = n * f / folds, hi = n * (f + 1) / folds;
    Tensor part({hi - lo, k});
    std::copy(post.data() + lo * k, post.data() + hi * k, part.data());
    fold_scores.push_back(inception_score_from_posteriors(part));
  }
  double mean = 0;
  for (double s : fold_scores) mean += s;
  mean /= folds;
  double var = 0;
  for (double s : fold_scores) var += (s - mean) * (s - mean);
  var /= (folds - 1);
  return {score, std::sqrt(var)};
}

double proxy_inception_score(const Tensor& samples, const OracleClassifier& oracle) {
  return inception_score_from_posteriors(oracle.posteriors(samples));
}

// ----------------------------------------------------------------- metrics

ModeMetrics mode_metrics(const Tensor& samples, const data::ModeSpec& modes,
                         double radius_sigmas) {
  if (modes.count() == 0) throw ContractError("mode_metrics: empty mode spec");
  if (samples.rank() != 2 || samples.dim(1) != modes.centers.dim(1))
    throw ShapeError("mode_metrics: samples " + samples.shape_str() +
                     " vs centers " + modes.centers.shape_str());
  const std::size_t n = samples.dim(0), m = modes.count(), d = samples.dim(1);
  ModeMetrics out;
  out.histogram.assign(m, 0);
  const double r2 = radius_sigmas * radius_sigmas * modes.sigma * modes.sigma;
  std::size_t hq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < m; ++k) {
      double s = 0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = samples.at(i, c) - modes.centers.at(k, c);
        s += diff * diff;
      }
      if (s < best) {
        best = s;
        arg = k;
      }
    }
    if (best <= r2) {
      ++hq;
      ++out.histogram[arg];
    }
  }
  const double need = std::max(1.0, 0.2 * static_cast<double>(n) / static_cast<double>(m));
  for (std::size_t k = 0; k < m; ++k)
    out.modes_covered += (static_cast<double>(out.histogram[k]) >= need);
  out.high_quality_fraction = n == 0 ? 0.0 : static_cast<double>(hq) / static_cast<double>(n);
  return out;
}

std::string EvalReport::csv_header() {
  return "iteration,proxy_score,score_stderr,modes_covered,hq_fraction";
}

std::string EvalReport::csv_row() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%zu,%.17g",
                static_cast<long long>(iteration), proxy_score, score_stderr,
                modes_covered, high_quality_fraction);
  return buf;
}

// ---------------------------------------------------------------- sampling

SampleBatch draw_samples(net::Generator& gen, const net::LatentSampler& latent,
                         std::size_t n, const std::vector<std::int32_t>& class_pool,
                         const std::vector<double>& class_weights, std::uint64_t seed) {
  if (class_pool.empty()) throw ContractError("draw_samples: empty class pool");
  if (!class_weights.empty() && class_weights.size() != class_pool.size())
    throw ContractError("draw_samples: weight list does not match class pool");
  Rng rng(seed);
  SampleBatch out;
  out.points = Tensor({n, gen.config().out_dim});
  out.labels.resize(n);

  double total = 0;
  for (double w : class_weights) total += w;

  const std::size_t chunk = 1024;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t stop = std::min(n, start + chunk);
    std::vector<std::int32_t> ids(stop - start);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (class_weights.empty()) {
        ids[i] = class_pool[rng.index(class_pool.size())];
      } else {
        double pick = rng.uniform01() * total;
        std::size_t k = class_pool.size() - 1;
        for (std::size_t c = 0; c < class_weights.size(); ++c) {
          pick -= class_weights[c];
          if (pick <= 0) {
            k = c;
            break;
          }
        }
        ids[i] = class_pool[k];
      }
      out.labels[start + i] = ids[i];
    }
    Tensor z = latent.sample(stop - start, rng);
    Tensor pts = gen.generate(z, ids, false);
    std::copy(pts.data(), pts.data() + pts.size(), out.points.data() + start * pts.dim(1));
  }
  return out;
}

EvalReport evaluate_model(net::Generator& gen, const net::LatentSampler& latent,
                          const OracleClassifier& oracle, const data::ModeSpec& modes,
                          std::size_t n_samples, std::uint64_t seed,
                          std::int64_t iteration, const std::vector<double>& class_weights) {
  SampleBatch batch =
      draw_samples(gen, latent, n_samples, gen.class_index().ids(), class_weights, seed);
  Tensor post = oracle.posteriors(batch.points);
  auto [score, spread] = inception_score_with_spread(post);
  ModeMetrics mm = mode_metrics(batch.points, modes);
  EvalReport rep;
  rep.iteration = iteration;
  rep.proxy_score = score;
  rep.score_stderr = spread;
  rep.modes_covered = mm.modes_covered;
  rep.high_quality_fraction = mm.high_quality_fraction;
  rep.histogram = std::move(mm.histogram);
  return rep;
}

BestSelection select_best_model(const std::vector<std::string>& checkpoint_paths,
                                const OracleClassifier& oracle,
                                std::size_t n_eval_samples, std::uint64_t seed) {
  if (checkpoint_paths.empty())
    throw ContractError("select_best_model: empty checkpoint stream");
  BestSelection best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < checkpoint_paths.size(); ++i) {
    run::TrainState state = run::load_checkpoint(checkpoint_paths[i]);
    SampleBatch batch = draw_samples(state.generator, state.latent_sampler(),
                                     n_eval_samples, state.generator.class_index().ids(),
                                     {}, mix_seed(seed, i));
    const double score = inception_score_from_posteriors(oracle.posteriors(batch.points));
    if (score > best_score) {
      best_score = score;
      best.path = checkpoint_paths[i];
      best.iteration = state.iteration;
      best.selection_score = score;
    }
  }
  run::TrainState winner = run::load_checkpoint(best.path);
  SampleBatch fresh = draw_samples(winner.generator, winner.latent_sampler(),
                                   n_eval_samples, winner.generator.class_index().ids(),
                                   {}, mix_seed(seed, 0x5eedULL, 1));
  auto [score, spread] = inception_score_with_spread(oracle.posteriors(fresh.points));
  best.final_score = score;
  best.final_stderr = spread;
  return best;
}

}  // namespace splitgan::eval
