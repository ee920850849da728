#include "splitgan/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "splitgan/errors.hpp"
#include "splitgan/rng.hpp"

namespace splitgan::data {

void ModeSpec::validate() const {
  if (count() == 0) return;
  if (sigma <= 0) throw ContractError("mode spec: sigma must be positive");
  if (weights.size() != count())
    throw ContractError("mode spec: " + std::to_string(weights.size()) +
                        " weights for " + std::to_string(count()) + " modes");
  double total = 0;
  for (double w : weights) {
    if (w <= 0) throw ContractError("mode spec: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ContractError("mode spec: weights sum to " + std::to_string(total));
}

std::size_t LabeledDataset::label_count(std::int32_t label) const {
  std::size_t n = 0;
  for (std::int32_t l : current_labels) n += (l == label);
  return n;
}

std::vector<std::int32_t> LabeledDataset::distinct_initial_labels() const {
  std::set<std::int32_t> s(initial_labels.begin(), initial_labels.end());
  return {s.begin(), s.end()};
}

namespace {

LabeledDataset sample_mixture(const ModeSpec& spec, std::size_t n_samples,
                              std::uint64_t seed,
                              const std::vector<std::int32_t>& mode_to_label) {
  spec.validate();
  const std::size_t m = spec.count(), d = spec.centers.dim(1);
  Rng rng(seed);
  LabeledDataset ds;
  ds.modes = spec;
  ds.points = Tensor({n_samples, d});
  ds.current_labels.resize(n_samples);
  ds.initial_labels.resize(n_samples);
  ds.mode_ids.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t k = rng.index(m);  // modes are equally weighted here
    for (std::size_t c = 0; c < d; ++c)
      ds.points.at(i, c) = spec.centers.at(k, c) + spec.sigma * rng.normal();
    ds.mode_ids[i] = static_cast<std::int32_t>(k);
    ds.initial_labels[i] = mode_to_label[k];
    ds.current_labels[i] = mode_to_label[k];
  }
  return ds;
}

}  // namespace

LabeledDataset gaussian_ring(std::size_t n_modes, double radius, double sigma,
                             std::size_t n_samples, std::uint64_t seed) {
  if (n_modes < 2) throw ContractError("gaussian_ring: need at least 2 modes");
  if (sigma <= 0 || radius <= 0)
    throw ContractError("gaussian_ring: radius and sigma must be positive");
  ModeSpec spec;
  spec.centers = Tensor({n_modes, 2});
  for (std::size_t k = 0; k < n_modes; ++k) {
    const double a = 2.0 * 3.14159265358979323846 * static_cast<double>(k) /
                     static_cast<double>(n_modes);
    spec.centers.at(k, 0) = radius * std::cos(a);
    spec.centers.at(k, 1) = radius * std::sin(a);
  }
  spec.sigma = sigma;
  spec.weights.assign(n_modes, 1.0 / static_cast<double>(n_modes));
  return sample_mixture(spec, n_samples, seed,
                        std::vector<std::int32_t>(n_modes, 0));
}

LabeledDataset gaussian_grid(std::size_t rows, std::size_t cols, double spacing,
                             double sigma, std::size_t n_samples, std::uint64_t seed,
                             bool supervised) {
  if (rows < 1 || cols < 1) throw ContractError("gaussian_grid: empty lattice");
  if (sigma <= 0 || spacing <= 0)
    throw ContractError("gaussian_grid: spacing and sigma must be positive");
  const std::size_t m = rows * cols;
  ModeSpec spec;
  spec.centers = Tensor({m, 2});
  const double cx = 0.5 * static_cast<double>(cols - 1) * spacing;
  const double cy = 0.5 * static_cast<double>(rows - 1) * spacing;
  std::vector<std::int32_t> mode_to_label(m, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = r * cols + c;
      spec.centers.at(k, 0) = static_cast<double>(c) * spacing - cx;
      spec.centers.at(k, 1) = static_cast<double>(r) * spacing - cy;
      if (supervised) mode_to_label[k] = static_cast<std::int32_t>(r);
    }
  }
  spec.sigma = sigma;
  spec.weights.assign(m, 1.0 / static_cast<double>(m));
  return sample_mixture(spec, n_samples, seed, mode_to_label);
}

// ------------------------------------------------------------- persistence

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') parse_fail(path, line, "bad number '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& path, std::size_t line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') parse_fail(path, line, "bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void save(const LabeledDataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  const std::size_t n = ds.size(), d = ds.dim(), m = ds.modes.count();
  f << "#dim=" << d << "\n#n=" << n << "\n#modes=" << m << "\n";
  if (m > 0) {
    f << "#sigma=" << fmt_double(ds.modes.sigma) << "\n";
    for (std::size_t k = 0; k < m; ++k) {
      f << "#mode=";
      for (std::size_t c = 0; c < d; ++c) f << fmt_double(ds.modes.centers.at(k, c)) << ',';
      f << fmt_double(ds.modes.weights[k]) << "\n";
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) f << fmt_double(ds.points.at(i, c)) << ',';
    f << ds.current_labels[i] << ',' << ds.initial_labels[i] << ',' << ds.mode_ids[i]
      << "\n";
  }
  if (!f) throw IoError("write failed for " + path);
}

LabeledDataset load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  std::size_t lineno = 0;

  long dim = -1, n = -1, modes = -1;
  double sigma = 0;
  std::vector<std::vector<double>> mode_rows;
  bool in_header = true;
  LabeledDataset ds;
  std::size_t body_row = 0;

  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!in_header) parse_fail(path, lineno, "header line after sample rows");
      const auto eq = line.find('=');
      if (eq == std::string::npos) parse_fail(path, lineno, "header without '='");
      const std::string key = line.substr(1, eq - 1);
      const std::string val = line.substr(eq + 1);
      if (key == "dim") dim = parse_long(val, path, lineno);
      else if (key == "n") n = parse_long(val, path, lineno);
      else if (key == "modes") modes = parse_long(val, path, lineno);
      else if (key == "sigma") sigma = parse_double(val, path, lineno);
      else if (key == "mode") {
        auto fields = split_csv(val);
        if (dim < 0 || fields.size() != static_cast<std::size_t>(dim) + 1)
          parse_fail(path, lineno, "mode line needs dim coordinates plus a weight");
        std::vector<double> row;
        for (const auto& s : fields) row.push_back(parse_double(s, path, lineno));
        mode_rows.push_back(std::move(row));
      } else {
        parse_fail(path, lineno, "unknown header key '" + key + "'");
      }
      continue;
    }
    if (in_header) {
      if (dim < 1 || n < 0 || modes < 0)
        parse_fail(path, lineno, "sample rows before dim/n/modes headers");
      if (mode_rows.size() != static_cast<std::size_t>(modes))
        parse_fail(path, lineno, "expected " + std::to_string(modes) + " mode lines, got " +
                                     std::to_string(mode_rows.size()));
      ds.points = Tensor({static_cast<std::size_t>(n), static_cast<std::size_t>(dim)});
      ds.current_labels.resize(n);
      ds.initial_labels.resize(n);
      ds.mode_ids.resize(n);
      if (modes > 0) {
        ds.modes.centers = Tensor({static_cast<std::size_t>(modes),
                                   static_cast<std::size_t>(dim)});
        ds.modes.sigma = sigma;
        for (std::size_t k = 0; k < mode_rows.size(); ++k) {
          for (long c = 0; c < dim; ++c) ds.modes.centers.at(k, c) = mode_rows[k][c];
          ds.modes.weights.push_back(mode_rows[k][dim]);
        }
        ds.modes.validate();
      }
      in_header = false;
    }
    if (body_row >= static_cast<std::size_t>(n))
      parse_fail(path, lineno, "more sample rows than n=" + std::to_string(n));
    auto fields = split_csv(line);
    if (fields.size() != static_cast<std::size_t>(dim) + 3)
      parse_fail(path, lineno, "expected " + std::to_string(dim + 3) + " fields, got " +
                                   std::to_string(fields.size()));
    for (long c = 0; c < dim; ++c) {
      const double v = parse_double(fields[c], path, lineno);
      if (!std::isfinite(v)) parse_fail(path, lineno, "non-finite coordinate");
      ds.points.at(body_row, c) = v;
    }
    ds.current_labels[body_row] = static_cast<std::int32_t>(parse_long(fields[dim], path, lineno));
    ds.initial_labels[body_row] =
        static_cast<std::int32_t>(parse_long(fields[dim + 1], path, lineno));
    ds.mode_ids[body_row] = static_cast<std::int32_t>(parse_long(fields[dim + 2], path, lineno));
    ++body_row;
  }
  if (in_header) {
    if (dim < 1 || n < 0 || modes < 0)
      throw ParseError(path + ": missing dim/n/modes headers");
    if (n != 0)
      throw ParseError(path + ": no sample rows, expected " + std::to_string(n));
    if (mode_rows.size() != static_cast<std::size_t>(modes))
      throw ParseError(path + ": expected " + std::to_string(modes) + " mode lines");
    ds.points = Tensor({0, static_cast<std::size_t>(dim)});
    if (modes > 0) {
      ds.modes.centers = Tensor({static_cast<std::size_t>(modes),
                                 static_cast<std::size_t>(dim)});
      ds.modes.sigma = sigma;
      for (std::size_t k = 0; k < mode_rows.size(); ++k) {
        for (long c = 0; c < dim; ++c) ds.modes.centers.at(k, c) = mode_rows[k][c];
        ds.modes.weights.push_back(mode_rows[k][dim]);
      }
      ds.modes.validate();
    }
    return ds;
  }
  if (body_row != static_cast<std::size_t>(n))
    throw ParseError(path + ": truncated: " + std::to_string(body_row) + " of " +
                     std::to_string(n) + " sample rows");
  return ds;
}

}  // namespace splitgan::data
