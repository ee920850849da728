#include "splitgan/splitting.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "splitgan/errors.hpp"
#include "splitgan/rng.hpp"

namespace splitgan::split {

RowNormalization normalization_from_string(const std::string& s) {
  if (s == "row-l2") return RowNormalization::RowL2;
  if (s == "feature-standardize") return RowNormalization::FeatureStandardize;
  throw ConfigError("clustering.normalization must be 'row-l2' or 'feature-standardize', got '" +
                    s + "'");
}

std::string to_string(RowNormalization n) {
  return n == RowNormalization::RowL2 ? "row-l2" : "feature-standardize";
}

FeatureMatrix extract_features(const data::LabeledDataset& ds, std::int32_t class_id,
                               net::Critic& critic) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.current_labels[i] == class_id) idx.push_back(i);
  if (idx.empty())
    throw ContractError("extract_features: class " + std::to_string(class_id) +
                        " has no samples");
  const std::size_t d = ds.dim(), width = critic.feature_width();
  FeatureMatrix out;
  out.rows = Tensor({idx.size(), width});
  const std::size_t batch = 512;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    const std::size_t stop = std::min(idx.size(), start + batch);
    Tensor x({stop - start, d});
    for (std::size_t r = start; r < stop; ++r)
      for (std::size_t c = 0; c < d; ++c) x.at(r - start, c) = ds.points.at(idx[r], c);
    Tensor feats = critic.features_values(x);
    for (std::size_t r = start; r < stop; ++r)
      for (std::size_t c = 0; c < width; ++c) out.rows.at(r, c) = feats.at(r - start, c);
  }
  return out;
}

FeatureMatrix normalize_rows(FeatureMatrix f) {
  const std::size_t n = f.rows.dim(0), w = f.rows.dim(1);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < w; ++c) s += f.rows.at(r, c) * f.rows.at(r, c);
    if (s == 0.0) continue;  // zero rows stay put
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t c = 0; c < w; ++c) f.rows.at(r, c) *= inv;
  }
  f.normalized = true;
  return f;
}

FeatureMatrix standardize_features(FeatureMatrix f) {
  const std::size_t n = f.rows.dim(0), w = f.rows.dim(1);
  if (n == 0) return f;
  for (std::size_t c = 0; c < w; ++c) {
    double mean = 0;
    for (std::size_t r = 0; r < n; ++r) mean += f.rows.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = f.rows.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t r = 0; r < n; ++r) f.rows.at(r, c) = (f.rows.at(r, c) - mean) * inv;
  }
  f.normalized = true;
  return f;
}

// ---------------------------------------------------------------- k-means

namespace {

double sq_dist_row(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
  const std::size_t w = a.dim(1);
  double s = 0;
  for (std::size_t c = 0; c < w; ++c) {
    const double d = a.at(ra, c) - b.at(rb, c);
    s += d * d;
  }
  return s;
}

struct LloydRun {
  std::vector<int> assignments;
  Tensor centroids;
  double inertia = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool empty_cluster = false;
  std::vector<double> inertia_trace;
};

LloydRun lloyd_once(const Tensor& x, std::uint64_t seed, int max_iters) {
  const std::size_t n = x.dim(0), w = x.dim(1);
  Rng rng(seed);
  LloydRun run;
  run.centroids = Tensor({2, w});

  // k-means++ for k = 2: first centroid uniform, second proportional to
  // squared distance from the first.
  const std::size_t first = rng.index(n);
  for (std::size_t c = 0; c < w; ++c) run.centroids.at(0, c) = x.at(first, c);
  std::vector<double> d2(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = sq_dist_row(x, i, run.centroids, 0);
    total += d2[i];
  }
  if (total <= 0) {
    run.empty_cluster = true;  // all rows coincide with the first pick
    return run;
  }
  double pick = rng.uniform01() * total;
  std::size_t second = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    pick -= d2[i];
    if (pick <= 0) {
      second = i;
      break;
    }
  }
  for (std::size_t c = 0; c < w; ++c) run.centroids.at(1, c) = x.at(second, c);

  run.assignments.assign(n, -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    std::array<std::size_t, 2> counts{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = sq_dist_row(x, i, run.centroids, 0);
      const double d1 = sq_dist_row(x, i, run.centroids, 1);
      const int a = d0 <= d1 ? 0 : 1;  // tie goes to the lower index
      if (a != run.assignments[i]) changed = true;
      run.assignments[i] = a;
      ++counts[a];
    }
    run.iterations = it + 1;
    if (counts[0] == 0 || counts[1] == 0) {
      run.empty_cluster = true;
      return run;
    }
    Tensor next({2, w});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < w; ++c)
        next.at(run.assignments[i], c) += x.at(i, c);
    for (int k = 0; k < 2; ++k)
      for (std::size_t c = 0; c < w; ++c)
        next.at(k, c) /= static_cast<double>(counts[k]);
    run.centroids = std::move(next);

    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += sq_dist_row(x, i, run.centroids, run.assignments[i]);
    run.inertia_trace.push_back(inertia);
    run.inertia = inertia;
    if (!changed) {
      run.converged = true;
      break;
    }
  }
  return run;
}

}  // namespace

KMeansResult kmeans2(const FeatureMatrix& f, std::uint64_t seed, int restarts,
                     int max_iters) {
  const Tensor& x = f.rows;
  if (x.rank() != 2) throw ContractError("kmeans2: features must be rank-2");
  const std::size_t n = x.dim(0);
  if (restarts < 1 || max_iters < 1)
    throw ContractError("kmeans2: restarts and max_iters must be positive");

  bool two_distinct = false;
  for (std::size_t i = 1; i < n && !two_distinct; ++i)
    two_distinct = sq_dist_row(x, i, x, 0) > 0;
  if (!two_distinct)
    throw DegenerateInputError("kmeans2: need at least 2 distinct rows");

  constexpr int kMaxRetries = 16;
  LloydRun best;
  bool have_any = false;
  for (int r = 0; r < restarts; ++r) {
    LloydRun run;
    for (int retry = 0; retry < kMaxRetries; ++retry) {
      run = lloyd_once(x, mix_seed(seed, static_cast<std::uint64_t>(r),
                                   static_cast<std::uint64_t>(retry)),
                       max_iters);
      if (!run.empty_cluster) break;
    }
    if (run.empty_cluster) continue;
    if (!have_any || run.inertia < best.inertia) {
      best = std::move(run);
      have_any = true;
    }
  }
  if (!have_any)
    throw SplitInfeasibleError("kmeans2: every restart ended with an empty cluster");

  KMeansResult out;
  out.assignments = std::move(best.assignments);
  out.centroids = std::move(best.centroids);
  out.inertia = best.inertia;
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.inertia_trace = std::move(best.inertia_trace);
  return out;
}

void relabel(data::LabeledDataset& ds, std::int32_t class_id,
             const std::vector<int>& assignments,
             const std::array<std::int32_t, 2>& child_ids) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.current_labels[i] == class_id) idx.push_back(i);
  if (idx.size() != assignments.size())
    throw ContractError("relabel: class " + std::to_string(class_id) + " has " +
                        std::to_string(idx.size()) + " samples but " +
                        std::to_string(assignments.size()) + " assignments");
  for (std::size_t k = 0; k < idx.size(); ++k)
    ds.current_labels[idx[k]] = child_ids[assignments[k] == 0 ? 0 : 1];
}

// -------------------------------------------------------------- split step

bool SplitReport::empty() const {
  for (const ClassSplitRecord& e : entries)
    if (!e.skipped) return false;
  return true;
}

std::string SplitReport::csv_header() {
  return "iteration,parent,child0,child1,size0,size1,inertia";
}

std::string SplitReport::csv_rows() const {
  std::ostringstream os;
  for (const ClassSplitRecord& e : entries) {
    if (e.skipped) continue;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", e.inertia);
    os << iteration << ',' << e.parent << ',' << e.children[0] << ',' << e.children[1]
       << ',' << e.sizes[0] << ',' << e.sizes[1] << ',' << buf << "\n";
  }
  return os.str();
}

SplitReport split_step(data::LabeledDataset& ds, net::Critic& critic,
                       net::Generator& generator, ClassTree& tree,
                       std::size_t kmeans_threshold, const ClusteringOptions& options,
                       std::uint64_t seed, std::int64_t iteration) {
  if (generator.class_index().ids() != tree.leaves() ||
      critic.class_index().ids() != tree.leaves())
    throw ContractError("split_step: model class tables out of sync with the tree");

  SplitReport report;
  report.iteration = iteration;

  // Phase 1: cluster every eligible class without touching anything.
  struct Pending {
    std::int32_t parent;
    KMeansResult km;
  };
  std::vector<Pending> pending;
  for (std::int32_t leaf : tree.leaves()) {
    const std::size_t population = ds.label_count(leaf);
    if (population <= kmeans_threshold) continue;
    ClassSplitRecord rec;
    rec.parent = leaf;
    FeatureMatrix f = extract_features(ds, leaf, critic);
    f = options.normalization == RowNormalization::RowL2 ? normalize_rows(std::move(f))
                                                         : standardize_features(std::move(f));
    try {
      KMeansResult km = kmeans2(f, mix_seed(seed, static_cast<std::uint64_t>(iteration),
                                            static_cast<std::uint64_t>(leaf)),
                                options.restarts, options.max_iters);
      rec.inertia = km.inertia;
      for (int a : km.assignments) ++rec.sizes[a == 0 ? 0 : 1];
      pending.push_back(Pending{leaf, std::move(km)});
    } catch (const DegenerateInputError& e) {
      rec.skipped = true;
      rec.skip_reason = e.what();
    } catch (const SplitInfeasibleError& e) {
      rec.skipped = true;
      rec.skip_reason = e.what();
    }
    report.entries.push_back(std::move(rec));
  }

  // Phase 2: commit. Pure bookkeeping; nothing here throws after the
  // validation performed above.
  net::SplitPlan plan;
  std::size_t rec_i = 0;
  for (Pending& p : pending) {
    while (report.entries[rec_i].skipped || report.entries[rec_i].parent != p.parent)
      ++rec_i;
    const auto children = tree.split(p.parent, iteration);
    relabel(ds, p.parent, p.km.assignments, children);
    report.entries[rec_i].children = children;
    plan.push_back(net::ClassSplit{p.parent, children});
  }
  if (!plan.empty()) {
    critic.extend_classifier_head(plan);
    generator.split_norm_params(plan);
  }
  return report;
}

}  // namespace splitgan::split
