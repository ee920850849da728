#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitgan/networks.hpp"
#include "splitgan/splitting.hpp"

namespace splitgan::run {

enum class LossMode { Gan, WganGp };
enum class ClassSampling { UniformLeaves, EmpiricalFrequencies };

/// Full hyperparameter set. The text form is dotted key = value lines;
/// unknown keys are errors and echo() round-trips through parse_text().
struct TrainConfig {
  LossMode loss = LossMode::WganGp;
  double lambda = 10.0;  // gradient-penalty coefficient
  double alpha_d = 1.0;  // critic auxiliary-loss weight (real samples)
  double alpha_g = 1.0;  // generator auxiliary-loss weight (own fakes)
  int n_critic = 5;
  std::size_t batch_size = 64;
  std::int64_t iterations = 20000;
  net::AdamConfig adam;

  // Clustering cadence: an explicit iteration list, or derived from
  // every_epochs x rounds once the dataset size is known.
  std::vector<std::int64_t> clustering_iterations;
  bool clustering_auto = true;
  double clustering_every_epochs = 10.0;
  int clustering_rounds = 3;
  std::size_t kmeans_threshold = 100;
  int clustering_restarts = 16;
  split::RowNormalization clustering_normalization = split::RowNormalization::RowL2;

  std::int64_t eval_cadence = 500;
  std::size_t eval_samples = 10000;
  ClassSampling eval_class_sampling = ClassSampling::UniformLeaves;

  std::size_t latent_dim = 8;
  std::vector<std::size_t> gen_hidden = {128, 128, 128};
  std::vector<std::size_t> critic_hidden = {128, 128, 128};
  net::LatentKind latent = net::LatentKind::Normal;

  std::uint64_t seed_data = 1;
  std::uint64_t seed_model = 2;
  std::uint64_t seed_training = 3;
  std::uint64_t seed_clustering = 4;

  void validate() const;  // ConfigError on any bad combination

  /// Turn the epoch-based cadence into concrete generator iterations
  /// (one epoch = ceil(n / batch_size) generator iterations). No-op when an
  /// explicit list was given.
  void resolve_clustering(std::size_t dataset_size);

  std::string echo() const;
  static TrainConfig parse_text(const std::string& text);
  static TrainConfig parse_file(const std::string& path);
};

std::string to_string(LossMode m);
std::string to_string(ClassSampling c);

}  // namespace splitgan::run
