#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "splitgan/data.hpp"
#include "splitgan/errors.hpp"
#include "splitgan/plot.hpp"
#include "splitgan/train.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int run_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, const std::string& resume) {
  auto cfg = splitgan::run::TrainConfig::parse_file(config_path);
  auto ds = splitgan::data::load(data_path);
  auto record = splitgan::run::train(cfg, std::move(ds), out_dir, resume);
  std::printf("trained %lld iterations; best iteration %lld (score %.4f), "
              "final score %.4f +/- %.4f\n",
              static_cast<long long>(record.end_iteration),
              static_cast<long long>(record.best_iteration), record.best_score,
              record.final_score, record.final_stderr);
  std::printf("run artifacts: %s\n", record.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-splitting GAN trainer for synthetic multimodal data"};
  app.require_subcommand(1);

  // train
  std::string config_path, data_path, out_path, resume_path, checkpoint_path, in_path;
  auto* train = app.add_subcommand("train", "Train a model from a config and dataset");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--data", data_path, "dataset file")->required();
  train->add_option("--out", out_path, "run output directory")->required();
  train->add_option("--resume", resume_path, "checkpoint to continue from");

  // sample
  std::size_t n_samples = 1000;
  std::int32_t class_id = -1;
  bool all_leaves = false;
  std::uint64_t seed = 1;
  auto* sample = app.add_subcommand("sample", "Draw samples from a checkpoint");
  sample->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  sample->add_option("-n,--n", n_samples, "number of samples")->required();
  auto* class_opt = sample->add_option("--class", class_id, "conditioning class id");
  sample->add_flag("--all-leaves", all_leaves, "condition uniformly over active classes");
  sample->add_option("--seed", seed, "sampling seed");
  sample->add_option("--out", out_path, "output sample file")->required();

  // eval
  std::size_t eval_samples = 10000;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint against a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--data", data_path, "dataset with ground-truth modes")->required();
  eval_cmd->add_option("--out", out_path, "output csv")->required();
  eval_cmd->add_option("--samples", eval_samples, "evaluation sample count");
  eval_cmd->add_option("--seed", seed, "sampling seed");

  // plot
  auto* plot = app.add_subcommand("plot", "Render a dataset/sample file or metrics csv");
  plot->add_option("--in", in_path, "input file")->required();
  plot->add_option("--out", out_path, "output svg")->required();

  // make-data
  std::string spec_kind;
  std::size_t modes = 8, grid_rows = 5, grid_cols = 5, n_points = 5000;
  double radius = 2.0, spacing = 2.0, sigma = 0.25;
  bool supervised = false;
  auto* make_data = app.add_subcommand("make-data", "Generate a synthetic dataset");
  make_data->add_option("--spec", spec_kind, "ring or grid")->required();
  make_data->add_option("--modes", modes, "ring: number of modes");
  make_data->add_option("--radius", radius, "ring: mode circle radius");
  make_data->add_option("--rows", grid_rows, "grid: rows");
  make_data->add_option("--cols", grid_cols, "grid: columns");
  make_data->add_option("--spacing", spacing, "grid: lattice spacing");
  make_data->add_option("--sigma", sigma, "mode standard deviation");
  make_data->add_option("--n", n_points, "sample count");
  make_data->add_option("--seed", seed, "generation seed");
  make_data->add_flag("--supervised", supervised, "grid: label classes by row");
  make_data->add_option("--out", out_path, "output dataset file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(config_path, data_path, out_path, resume_path);

    if (sample->parsed()) {
      if (class_opt->count() > 0 && all_leaves)
        throw splitgan::ConfigError("sample: pass --class or --all-leaves, not both");
      std::optional<std::int32_t> cls;
      if (class_opt->count() > 0) cls = class_id;
      auto batch =
          splitgan::run::sample_from_checkpoint(checkpoint_path, n_samples, cls, seed);
      splitgan::run::write_sample_file(batch, out_path);
      std::printf("wrote %zu samples to %s\n", n_samples, out_path.c_str());
      return 0;
    }

    if (eval_cmd->parsed()) {
      auto ds = splitgan::data::load(data_path);
      auto rep =
          splitgan::run::evaluate_checkpoint(checkpoint_path, ds, eval_samples, seed);
      std::ofstream out(out_path);
      if (!out) throw splitgan::IoError("cannot write " + out_path);
      out << splitgan::eval::EvalReport::csv_header() << "\n" << rep.csv_row() << "\n";
      std::printf("proxy score %.4f +/- %.4f, %zu modes covered, hq fraction %.4f\n",
                  rep.proxy_score, rep.score_stderr, rep.modes_covered,
                  rep.high_quality_fraction);
      return 0;
    }

    if (plot->parsed()) {
      splitgan::plot::plot_file(in_path, out_path);
      std::printf("wrote %s\n", out_path.c_str());
      return 0;
    }

    if (make_data->parsed()) {
      splitgan::data::LabeledDataset ds;
      if (spec_kind == "ring") {
        ds = splitgan::data::gaussian_ring(modes, radius, sigma, n_points, seed);
      } else if (spec_kind == "grid") {
        ds = splitgan::data::gaussian_grid(grid_rows, grid_cols, spacing, sigma, n_points,
                                           seed, supervised);
      } else {
        throw splitgan::ConfigError("make-data: --spec must be 'ring' or 'grid'");
      }
      splitgan::data::save(ds, out_path);
      std::printf("wrote %zu samples (%zu modes) to %s\n", ds.size(), ds.modes.count(),
                  out_path.c_str());
      return 0;
    }
  } catch (const splitgan::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const splitgan::NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return kExitNumeric;
  } catch (const splitgan::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const splitgan::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitIo;
  } catch (const splitgan::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
