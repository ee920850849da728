#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitgan/class_tree.hpp"
#include "splitgan/config.hpp"
#include "splitgan/networks.hpp"
#include "splitgan/rng.hpp"

namespace splitgan::run {

/// Everything a run needs to continue bit-exactly: models with optimizer
/// state, the class tree, the mutated dataset labels, and the training RNG.
struct TrainState {
  TrainConfig config;  // resolved; its echo is embedded in the checkpoint
  std::int64_t iteration = 0;
  net::Generator generator;
  net::Critic critic;
  split::ClassTree tree;
  std::vector<std::int32_t> dataset_labels;
  Rng training_rng;
  double best_score = -1.0;
  std::int64_t best_iteration = -1;

  net::LatentSampler latent_sampler() const {
    return net::LatentSampler{config.latent_dim, config.latent};
  }
};

/// Binary container: magic + version, then named sections sorted by name.
/// Writing the result of a load reproduces the input byte for byte.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

}  // namespace splitgan::run
