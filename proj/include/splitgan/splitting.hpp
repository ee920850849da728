#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "splitgan/class_tree.hpp"
#include "splitgan/data.hpp"
#include "splitgan/networks.hpp"
#include "splitgan/tensor.hpp"

namespace splitgan::split {

/// Critic last-hidden-layer activations for the samples of one class,
/// in dataset order.
struct FeatureMatrix {
  Tensor rows;  // [n, width]
  bool normalized = false;
};

struct KMeansResult {
  std::vector<int> assignments;  // 0/1 per row, nearer centroid wins, ties -> 0
  Tensor centroids;              // [2, width]
  double inertia = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> inertia_trace;  // one entry per Lloyd update
};

enum class RowNormalization { RowL2, FeatureStandardize };

struct ClusteringOptions {
  int restarts = 16;
  int max_iters = 300;
  RowNormalization normalization = RowNormalization::RowL2;
};

RowNormalization normalization_from_string(const std::string& s);
std::string to_string(RowNormalization n);

/// One row per sample of `class_id`, inference mode, dataset order.
FeatureMatrix extract_features(const data::LabeledDataset& ds, std::int32_t class_id,
                               net::Critic& critic);

/// Scale each row to unit L2 norm; all-zero rows stay zero.
FeatureMatrix normalize_rows(FeatureMatrix f);

/// Per-feature standardization, the alternative normalization variant.
FeatureMatrix standardize_features(FeatureMatrix f);

/// Best-of-`restarts` Lloyd runs with k-means++ seeding, k = 2. Runs that
/// converge with an empty cluster retry on a derived sub-seed a bounded
/// number of times. Deterministic given the seed.
KMeansResult kmeans2(const FeatureMatrix& f, std::uint64_t seed, int restarts = 16,
                     int max_iters = 300);

/// Rewrite the labels of one class according to the cluster assignments.
void relabel(data::LabeledDataset& ds, std::int32_t class_id,
             const std::vector<int>& assignments,
             const std::array<std::int32_t, 2>& child_ids);

struct ClassSplitRecord {
  std::int32_t parent = -1;
  std::array<std::int32_t, 2> children{-1, -1};
  std::array<std::size_t, 2> sizes{0, 0};
  double inertia = 0.0;
  bool skipped = false;
  std::string skip_reason;
};

struct SplitReport {
  std::int64_t iteration = 0;
  std::vector<ClassSplitRecord> entries;

  bool empty() const;
  std::string csv_rows() const;  // one row per performed split
  static std::string csv_header();
};

/// One clustering round: cluster every leaf whose population exceeds the
/// threshold, replace its labels with two fresh child classes, and grow the
/// classifier head and conditional-norm tables. All clustering happens before
/// any mutation, so a failure part-way leaves dataset and models untouched;
/// infeasible classes are skipped, never fatal.
SplitReport split_step(data::LabeledDataset& ds, net::Critic& critic,
                       net::Generator& generator, ClassTree& tree,
                       std::size_t kmeans_threshold, const ClusteringOptions& options,
                       std::uint64_t seed, std::int64_t iteration);

}  // namespace splitgan::split
