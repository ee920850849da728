#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splitgan/checkpoint.hpp"
#include "splitgan/config.hpp"
#include "splitgan/data.hpp"
#include "splitgan/evaluation.hpp"
#include "splitgan/losses.hpp"
#include "splitgan/splitting.hpp"

namespace splitgan::run {

/// Everything a finished (or aborted) run leaves behind, mirrored on disk in
/// the run directory: config.txt, metrics.csv, splits.csv, eval.csv,
/// checkpoints/ and summary.txt.
struct RunRecord {
  TrainConfig config;
  std::vector<std::int64_t> loss_iterations;
  std::vector<loss::LossBreakdown> losses;
  std::vector<eval::EvalReport> evals;
  std::vector<split::SplitReport> splits;
  std::int64_t start_iteration = 0;
  std::int64_t end_iteration = 0;
  double wall_seconds = 0.0;
  std::string best_checkpoint;
  double best_score = -1.0;
  std::int64_t best_iteration = -1;
  double final_score = 0.0;   // winner re-scored on a fresh sample
  double final_stderr = 0.0;
  std::string status = "ok";
  std::string out_dir;
};

/// Run the full training loop: n_critic critic updates then one generator
/// update per iteration, a clustering step at each configured iteration,
/// checkpoints and evaluation on cadence. Deterministic given the config
/// seeds. The dataset is taken by value because splitting rewrites labels.
RunRecord train(TrainConfig cfg, data::LabeledDataset dataset, const std::string& out_dir,
                const std::string& resume_checkpoint = "");

/// Inference draws from a stored model, written in the dataset text format
/// with the conditioning class as the label.
eval::SampleBatch sample_from_checkpoint(const std::string& checkpoint_path, std::size_t n,
                                         std::optional<std::int32_t> class_id,
                                         std::uint64_t seed);
void write_sample_file(const eval::SampleBatch& batch, const std::string& path);

/// Score a stored model against a dataset's ground-truth modes.
eval::EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                                     const data::LabeledDataset& ds,
                                     std::size_t n_samples, std::uint64_t seed);

std::string metrics_csv_header();
std::string metrics_csv_row(std::int64_t iteration, const loss::LossBreakdown& b);

}  // namespace splitgan::run
