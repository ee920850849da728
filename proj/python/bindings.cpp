#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "splitgan/data.hpp"
#include "splitgan/errors.hpp"
#include "splitgan/evaluation.hpp"
#include "splitgan/plot.hpp"
#include "splitgan/splitting.hpp"
#include "splitgan/train.hpp"

namespace py = pybind11;
using namespace splitgan;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> shape;
  for (py::ssize_t d = 0; d < a.ndim(); ++d)
    shape.push_back(static_cast<std::size_t>(a.shape(d)));
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (std::size_t d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

py::dict dataset_to_dict(const data::LabeledDataset& ds) {
  py::dict d;
  d["points"] = array_from_tensor(ds.points);
  d["current_labels"] = ds.current_labels;
  d["initial_labels"] = ds.initial_labels;
  d["mode_ids"] = ds.mode_ids;
  d["mode_centers"] = array_from_tensor(ds.modes.centers);
  d["sigma"] = ds.modes.sigma;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Class-splitting GAN training on synthetic multimodal data";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericFault>(m, "NumericFault");
  py::register_exception<ContractError>(m, "ContractError");

  m.def(
      "make_ring",
      [](std::size_t modes, double radius, double sigma, std::size_t n, std::uint64_t seed) {
        return dataset_to_dict(data::gaussian_ring(modes, radius, sigma, n, seed));
      },
      py::arg("modes") = 8, py::arg("radius") = 2.0, py::arg("sigma") = 0.05,
      py::arg("n") = 5000, py::arg("seed") = 1);

  m.def(
      "make_grid",
      [](std::size_t rows, std::size_t cols, double spacing, double sigma, std::size_t n,
         std::uint64_t seed, bool supervised) {
        return dataset_to_dict(
            data::gaussian_grid(rows, cols, spacing, sigma, n, seed, supervised));
      },
      py::arg("rows") = 5, py::arg("cols") = 5, py::arg("spacing") = 2.0,
      py::arg("sigma") = 0.05, py::arg("n") = 5000, py::arg("seed") = 1,
      py::arg("supervised") = false);

  m.def(
      "save_dataset",
      [](const std::string& path, py::array_t<double> points,
         const std::vector<std::int32_t>& labels) {
        data::LabeledDataset ds;
        ds.points = tensor_from_array(points);
        ds.current_labels = labels;
        ds.initial_labels = labels;
        ds.mode_ids.assign(labels.size(), -1);
        data::save(ds, path);
      },
      py::arg("path"), py::arg("points"), py::arg("labels"));

  m.def(
      "load_dataset",
      [](const std::string& path) { return dataset_to_dict(data::load(path)); },
      py::arg("path"));

  m.def(
      "kmeans2",
      [](py::array_t<double> features, std::uint64_t seed, int restarts, int max_iters) {
        split::FeatureMatrix f;
        f.rows = tensor_from_array(features);
        split::KMeansResult r = split::kmeans2(f, seed, restarts, max_iters);
        py::dict d;
        d["assignments"] = r.assignments;
        d["centroids"] = array_from_tensor(r.centroids);
        d["inertia"] = r.inertia;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("features"), py::arg("seed") = 0, py::arg("restarts") = 16,
      py::arg("max_iters") = 300);

  m.def(
      "normalize_rows",
      [](py::array_t<double> features) {
        split::FeatureMatrix f;
        f.rows = tensor_from_array(features);
        return array_from_tensor(split::normalize_rows(std::move(f)).rows);
      },
      py::arg("features"));

  m.def(
      "inception_score",
      [](py::array_t<double> posteriors) {
        return eval::inception_score_from_posteriors(tensor_from_array(posteriors));
      },
      py::arg("posteriors"));

  m.def(
      "mode_metrics",
      [](py::array_t<double> samples, py::array_t<double> centers, double sigma,
         double radius_sigmas) {
        data::ModeSpec spec;
        spec.centers = tensor_from_array(centers);
        spec.sigma = sigma;
        spec.weights.assign(spec.count(), 1.0 / static_cast<double>(spec.count()));
        eval::ModeMetrics mm = eval::mode_metrics(tensor_from_array(samples), spec,
                                                  radius_sigmas);
        py::dict d;
        d["modes_covered"] = mm.modes_covered;
        d["high_quality_fraction"] = mm.high_quality_fraction;
        d["histogram"] = mm.histogram;
        return d;
      },
      py::arg("samples"), py::arg("centers"), py::arg("sigma"),
      py::arg("radius_sigmas") = 3.0);

  m.def("default_config", [] { return run::TrainConfig().echo(); });

  m.def(
      "train",
      [](const std::string& config_text, const std::string& data_path,
         const std::string& out_dir, const std::string& resume) {
        run::TrainConfig cfg = run::TrainConfig::parse_text(config_text);
        data::LabeledDataset ds = data::load(data_path);
        run::RunRecord rec;
        {
          py::gil_scoped_release release;
          rec = run::train(cfg, std::move(ds), out_dir, resume);
        }
        py::dict d;
        d["iterations"] = rec.end_iteration;
        d["best_iteration"] = rec.best_iteration;
        d["best_score"] = rec.best_score;
        d["final_score"] = rec.final_score;
        d["final_stderr"] = rec.final_stderr;
        d["best_checkpoint"] = rec.best_checkpoint;
        d["out_dir"] = rec.out_dir;
        d["status"] = rec.status;
        return d;
      },
      py::arg("config_text"), py::arg("data_path"), py::arg("out_dir"),
      py::arg("resume") = "");

  m.def(
      "sample",
      [](const std::string& checkpoint, std::size_t n, std::optional<std::int32_t> class_id,
         std::uint64_t seed) {
        eval::SampleBatch b = run::sample_from_checkpoint(checkpoint, n, class_id, seed);
        py::dict d;
        d["points"] = array_from_tensor(b.points);
        d["labels"] = b.labels;
        return d;
      },
      py::arg("checkpoint"), py::arg("n"), py::arg("class_id") = std::nullopt,
      py::arg("seed") = 1);

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& data_path, std::size_t n,
         std::uint64_t seed) {
        data::LabeledDataset ds = data::load(data_path);
        eval::EvalReport rep;
        {
          py::gil_scoped_release release;
          rep = run::evaluate_checkpoint(checkpoint, ds, n, seed);
        }
        py::dict d;
        d["proxy_score"] = rep.proxy_score;
        d["score_stderr"] = rep.score_stderr;
        d["modes_covered"] = rep.modes_covered;
        d["high_quality_fraction"] = rep.high_quality_fraction;
        return d;
      },
      py::arg("checkpoint"), py::arg("data_path"), py::arg("n") = 10000,
      py::arg("seed") = 1);

  m.def("plot", &plot::plot_file, py::arg("in_path"), py::arg("out_svg"));

#ifdef SPLITGAN_VERSION
  m.attr("__version__") = SPLITGAN_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
