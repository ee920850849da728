#include "splitgan/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "splitgan/autodiff.hpp"
#include "splitgan/errors.hpp"

namespace splitgan::run {

namespace fs = std::filesystem;
using ad::Tape;
using ad::Var;

namespace {

std::string checkpoint_path(const std::string& out_dir, std::int64_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06lld.bin", static_cast<long long>(iteration));
  return out_dir + "/checkpoints/" + buf;
}

std::vector<std::int32_t> uniform_leaf_ids(const net::ClassIndex& idx, std::size_t n,
                                           Rng& rng) {
  std::vector<std::int32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = idx.id_of(rng.index(idx.count()));
  return ids;
}

// One critic update. Draw order from the training stream is fixed: real
// indices, latents, fake class ids, interpolation epsilons.
loss::LossBreakdown critic_step(TrainState& state, const data::LabeledDataset& ds,
                                const TrainConfig& cfg) {
  const std::size_t b = cfg.batch_size, n = ds.size(), d = ds.dim();
  Rng& rng = state.training_rng;
  const net::LatentSampler latent = state.latent_sampler();

  Tensor x_real({b, d});
  std::vector<std::int64_t> real_rows(b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t idx = rng.index(n);
    for (std::size_t c = 0; c < d; ++c) x_real.at(i, c) = ds.points.at(idx, c);
    real_rows[i] =
        static_cast<std::int64_t>(state.critic.class_index().row_of(ds.current_labels[idx]));
  }
  Tensor z = latent.sample(b, rng);
  std::vector<std::int32_t> fake_ids =
      uniform_leaf_ids(state.generator.class_index(), b, rng);

  // The critic update treats the generator as a fixed sampler, so the fake
  // batch is produced on a scratch tape and enters the critic graph as data.
  Tensor fake;
  {
    Tape gt;
    net::Binding gb(gt, false);
    fake = state.generator.forward(gb, gt.constant(z), fake_ids, true, true).val();
  }

  loss::LossBreakdown out;
  Tape t;
  net::Binding cb(t, true);
  net::CriticOut real_out = state.critic.criticize(cb, t.constant(x_real));
  net::CriticOut fake_out = state.critic.criticize(cb, t.constant(fake));

  Var total;
  if (cfg.loss == LossMode::WganGp) {
    Var core = loss::wgan_critic_core(real_out.score, fake_out.score);
    Tensor x_hat = loss::sample_interpolates(x_real, fake, rng);
    Var gp = loss::gradient_penalty(state.critic, cb, x_hat);
    out.critic_wasserstein = core.val().item();
    out.gradient_penalty = gp.val().item();
    total = ad::add(core, ad::scale(gp, cfg.lambda));
  } else {
    Var bce = loss::gan_discriminator_loss(ad::sigmoid(real_out.score),
                                           ad::sigmoid(fake_out.score));
    out.critic_wasserstein = bce.val().item();
    total = bce;
  }
  if (cfg.alpha_d > 0) {
    Var aux = loss::aux_classification_loss(real_out.logits, real_rows);
    out.critic_aux = aux.val().item();
    total = ad::add(total, ad::scale(aux, cfg.alpha_d));
  }

  ad::GradientMap grads = ad::backward(total);
  for (net::Param* p : state.critic.params()) p->adam_step(grads.at(cb.var(*p)), cfg.adam);
  return out;
}

void generator_step(TrainState& state, const TrainConfig& cfg, loss::LossBreakdown& out) {
  const std::size_t b = cfg.batch_size;
  Rng& rng = state.training_rng;
  const net::LatentSampler latent = state.latent_sampler();

  Tensor z = latent.sample(b, rng);
  std::vector<std::int32_t> ids = uniform_leaf_ids(state.generator.class_index(), b, rng);

  Tape t;
  net::Binding gb(t, true);
  net::Binding cb(t, false);
  Var fake = state.generator.forward(gb, t.constant(z), ids, true, true);
  net::CriticOut critic_out = state.critic.criticize(cb, fake);

  Var adv = cfg.loss == LossMode::WganGp
                ? loss::generator_wgan_loss(critic_out.score)
                : loss::gan_generator_loss(ad::sigmoid(critic_out.score));
  out.generator_adversarial = adv.val().item();
  Var total = adv;
  if (cfg.alpha_g > 0) {
    std::vector<std::int64_t> rows(b);
    for (std::size_t i = 0; i < b; ++i)
      rows[i] = static_cast<std::int64_t>(state.critic.class_index().row_of(ids[i]));
    Var aux = loss::aux_classification_loss(critic_out.logits, rows);
    out.generator_aux = aux.val().item();
    total = ad::add(total, ad::scale(aux, cfg.alpha_g));
  }

  ad::GradientMap grads = ad::backward(total);
  for (net::Param* p : state.generator.params())
    p->adam_step(grads.at(gb.var(*p)), cfg.adam);
}

std::vector<double> empirical_leaf_weights(const data::LabeledDataset& ds,
                                           const net::ClassIndex& idx) {
  std::vector<double> w(idx.count(), 0.0);
  for (std::int32_t l : ds.current_labels) w[idx.row_of(l)] += 1.0;
  return w;
}

}  // namespace

std::string metrics_csv_header() {
  return "iteration,critic_wasserstein,gradient_penalty,critic_aux,"
         "generator_adversarial,generator_aux,total_critic,total_generator";
}

std::string metrics_csv_row(std::int64_t iteration, const loss::LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(iteration), b.critic_wasserstein,
                b.gradient_penalty, b.critic_aux, b.generator_adversarial,
                b.generator_aux, b.total_critic, b.total_generator);
  return buf;
}

RunRecord train(TrainConfig cfg, data::LabeledDataset dataset, const std::string& out_dir,
                const std::string& resume_checkpoint) {
  const auto wall_start = std::chrono::steady_clock::now();
  cfg.validate();
  cfg.resolve_clustering(dataset.size());
  cfg.validate();
  if (dataset.size() == 0) throw ContractError("train: empty dataset");

  fs::create_directories(out_dir + "/checkpoints");

  TrainState state;
  if (resume_checkpoint.empty()) {
    const auto initial = dataset.distinct_initial_labels();
    for (std::size_t i = 0; i < initial.size(); ++i) {
      if (initial[i] != static_cast<std::int32_t>(i))
        throw ContractError("train: initial labels must be 0..C-1");
    }
    if (dataset.current_labels != dataset.initial_labels)
      throw ContractError("train: dataset labels were already rewritten; "
                          "a fresh run needs current == initial");
    state.config = cfg;
    state.tree = split::ClassTree(initial.size());
    Rng model_rng(cfg.seed_model);
    net::GeneratorConfig gcfg{cfg.latent_dim, cfg.gen_hidden, dataset.dim(), 0.2};
    net::CriticConfig ccfg{dataset.dim(), cfg.critic_hidden, 0.2};
    state.generator = net::Generator(gcfg, initial.size(), model_rng);
    state.critic = net::Critic(ccfg, initial.size(), model_rng);
    state.training_rng = Rng(cfg.seed_training);
    state.dataset_labels = dataset.current_labels;
  } else {
    state = load_checkpoint(resume_checkpoint);
    if (state.config.echo() != cfg.echo())
      throw ConfigError("resume: configuration differs from the checkpoint's");
    if (state.dataset_labels.size() != dataset.size())
      throw ContractError("resume: dataset size differs from the checkpoint's");
    dataset.current_labels = state.dataset_labels;
  }

  RunRecord record;
  record.config = cfg;
  record.out_dir = out_dir;
  record.start_iteration = state.iteration;
  record.best_score = state.best_score;
  record.best_iteration = state.best_iteration;

  {
    std::ofstream f(out_dir + "/config.txt");
    if (!f) throw IoError("cannot write " + out_dir + "/config.txt");
    f << cfg.echo();
  }

  // Scoring needs ground-truth modes; datasets without them still train,
  // they just skip evaluation and best-model tracking.
  std::optional<eval::OracleClassifier> oracle;
  if (dataset.modes.count() >= 2)
    oracle = eval::train_oracle(dataset, mix_seed(cfg.seed_data, 0x0eac1eULL));

  std::ofstream metrics(out_dir + "/metrics.csv");
  std::ofstream splits_csv(out_dir + "/splits.csv");
  std::ofstream eval_csv(out_dir + "/eval.csv");
  if (!metrics || !splits_csv || !eval_csv)
    throw IoError("cannot create run logs under " + out_dir);
  metrics << metrics_csv_header() << "\n";
  splits_csv << split::SplitReport::csv_header() << "\n";
  eval_csv << eval::EvalReport::csv_header() << "\n";

  std::set<std::int64_t> cluster_at(cfg.clustering_iterations.begin(),
                                    cfg.clustering_iterations.end());
  std::string last_checkpoint;

  auto save_state = [&](std::int64_t iteration) {
    state.iteration = iteration;
    state.dataset_labels = dataset.current_labels;
    state.best_score = record.best_score;
    state.best_iteration = record.best_iteration;
    const std::string path = checkpoint_path(out_dir, iteration);
    save_checkpoint(state, path);
    last_checkpoint = path;
    return path;
  };

  auto run_eval = [&](std::int64_t iteration, const std::string& ckpt) {
    if (!oracle) return;
    std::vector<double> weights;
    if (cfg.eval_class_sampling == ClassSampling::EmpiricalFrequencies)
      weights = empirical_leaf_weights(dataset, state.generator.class_index());
    eval::EvalReport rep = eval::evaluate_model(
        state.generator, state.latent_sampler(), *oracle, dataset.modes,
        cfg.eval_samples, mix_seed(cfg.seed_model, 0xE7A1ULL, iteration), iteration,
        weights);
    eval_csv << rep.csv_row() << "\n" << std::flush;
    record.evals.push_back(rep);
    if (rep.proxy_score > record.best_score) {
      record.best_score = rep.proxy_score;
      record.best_iteration = iteration;
      record.best_checkpoint = ckpt;
    }
  };

  if (state.iteration == 0) save_state(0);

  try {
    for (std::int64_t t = state.iteration + 1; t <= cfg.iterations; ++t) {
      loss::LossBreakdown b;
      for (int k = 0; k < cfg.n_critic; ++k) b = critic_step(state, dataset, cfg);

      // Clustering sits between the critic updates and the generator update
      // so features come from the freshest critic.
      if (cluster_at.count(t)) {
        split::ClusteringOptions opts;
        opts.restarts = cfg.clustering_restarts;
        opts.normalization = cfg.clustering_normalization;
        split::SplitReport rep =
            split_step(dataset, state.critic, state.generator, state.tree,
                       cfg.kmeans_threshold, opts, cfg.seed_clustering, t);
        splits_csv << rep.csv_rows() << std::flush;
        record.splits.push_back(std::move(rep));
      }

      generator_step(state, cfg, b);
      b.finalize(cfg.loss == LossMode::WganGp ? cfg.lambda : 0.0, cfg.alpha_d,
                 cfg.alpha_g);
      metrics << metrics_csv_row(t, b) << "\n";
      record.loss_iterations.push_back(t);
      record.losses.push_back(b);

      if (t % cfg.eval_cadence == 0 || t == cfg.iterations) {
        // Evaluate before saving so the checkpoint carries best-model
        // tracking that includes this very iteration; resume depends on it.
        run_eval(t, checkpoint_path(out_dir, t));
        save_state(t);
      }
      state.iteration = t;
    }
  } catch (const NumericFault& e) {
    record.status = "aborted-numeric-fault";
    record.end_iteration = state.iteration;
    metrics.flush();
    splits_csv.flush();
    eval_csv.flush();
    std::ofstream summary(out_dir + "/summary.txt");
    summary << "status = " << record.status << "\n"
            << "error = " << e.what() << "\n"
            << "last_good_checkpoint = " << last_checkpoint << "\n";
    throw NumericFault(std::string(e.what()) + " (last good checkpoint: " +
                       last_checkpoint + ")");
  }

  record.end_iteration = cfg.iterations;

  // Re-score the winner on a fresh sample so the reported number is not the
  // selection-time one.
  if (oracle && record.best_iteration >= 0) {
    TrainState best = load_checkpoint(record.best_checkpoint);
    eval::SampleBatch fresh = eval::draw_samples(
        best.generator, best.latent_sampler(), cfg.eval_samples,
        best.generator.class_index().ids(), {},
        mix_seed(cfg.seed_model, 0xF1A1ULL, record.best_iteration));
    auto [score, spread] =
        eval::inception_score_with_spread(oracle->posteriors(fresh.points));
    record.final_score = score;
    record.final_stderr = spread;
  }

  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  {
    std::ofstream summary(out_dir + "/summary.txt");
    char buf[256];
    summary << "status = " << record.status << "\n";
    summary << "iterations = " << record.end_iteration << "\n";
    std::snprintf(buf, sizeof buf, "best_iteration = %lld\nbest_score = %.17g\n",
                  static_cast<long long>(record.best_iteration), record.best_score);
    summary << buf;
    std::snprintf(buf, sizeof buf, "final_score = %.17g\nfinal_stderr = %.17g\n",
                  record.final_score, record.final_stderr);
    summary << buf;
    summary << "best_checkpoint = " << record.best_checkpoint << "\n";
    std::snprintf(buf, sizeof buf, "wall_seconds = %.3f\n", record.wall_seconds);
    summary << buf;
  }
  return record;
}

eval::SampleBatch sample_from_checkpoint(const std::string& checkpoint_path, std::size_t n,
                                         std::optional<std::int32_t> class_id,
                                         std::uint64_t seed) {
  TrainState state = load_checkpoint(checkpoint_path);
  std::vector<std::int32_t> pool;
  if (class_id) {
    if (!state.generator.class_index().active(*class_id))
      throw ContractError("sample: class " + std::to_string(*class_id) +
                          " is not an active leaf");
    pool = {*class_id};
  } else {
    pool = state.generator.class_index().ids();
  }
  return eval::draw_samples(state.generator, state.latent_sampler(), n, pool, {}, seed);
}

void write_sample_file(const eval::SampleBatch& batch, const std::string& path) {
  data::LabeledDataset ds;
  ds.points = batch.points;
  ds.current_labels = batch.labels;
  ds.initial_labels = batch.labels;
  ds.mode_ids.assign(batch.labels.size(), -1);
  data::save(ds, path);
}

eval::EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                                     const data::LabeledDataset& ds,
                                     std::size_t n_samples, std::uint64_t seed) {
  TrainState state = load_checkpoint(checkpoint_path);
  eval::OracleClassifier oracle =
      eval::train_oracle(ds, mix_seed(state.config.seed_data, 0x0eac1eULL));
  return eval::evaluate_model(state.generator, state.latent_sampler(), oracle, ds.modes,
                              n_samples, seed, state.iteration);
}

}  // namespace splitgan::run
