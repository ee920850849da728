#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitgan/tensor.hpp"

namespace splitgan::data {

/// Ground-truth mixture the synthetic datasets are drawn from.
struct ModeSpec {
  Tensor centers;               // [m, d]
  double sigma = 0.0;           // shared isotropic std
  std::vector<double> weights;  // positive, sum to 1

  std::size_t count() const { return centers.rank() == 2 ? centers.dim(0) : 0; }
  void validate() const;
};

/// Samples with mutable training labels and immutable provenance. Only the
/// splitting step may rewrite current_labels.
struct LabeledDataset {
  Tensor points;  // [n, d]
  std::vector<std::int32_t> current_labels;
  std::vector<std::int32_t> initial_labels;
  std::vector<std::int32_t> mode_ids;  // -1 when unknown (generated samples)
  ModeSpec modes;

  std::size_t size() const { return current_labels.size(); }
  std::size_t dim() const { return points.rank() == 2 ? points.dim(1) : 0; }
  std::size_t label_count(std::int32_t label) const;
  std::vector<std::int32_t> distinct_initial_labels() const;
};

/// Modes on a circle at angles 2*pi*k/n_modes, all samples labeled 0.
LabeledDataset gaussian_ring(std::size_t n_modes, double radius, double sigma,
                             std::size_t n_samples, std::uint64_t seed);

/// rows x cols lattice of modes. Supervised construction labels each sample
/// with its grid row, so every class holds `cols` discoverable sub-modes.
LabeledDataset gaussian_grid(std::size_t rows, std::size_t cols, double spacing,
                             double sigma, std::size_t n_samples, std::uint64_t seed,
                             bool supervised);

/// Text format: '#key=value' header lines (dim, n, modes, then mixture
/// metadata), one comma-separated sample row per line after that.
void save(const LabeledDataset& ds, const std::string& path);
LabeledDataset load(const std::string& path);

}  // namespace splitgan::data
