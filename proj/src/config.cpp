#include "splitgan/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "splitgan/errors.hpp"

namespace splitgan::run {

std::string to_string(LossMode m) { return m == LossMode::Gan ? "gan" : "wgan-gp"; }

std::string to_string(ClassSampling c) {
  return c == ClassSampling::UniformLeaves ? "uniform-leaves" : "empirical-frequencies";
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double want_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key + ": bad number '" + v + "'");
  return x;
}

std::int64_t want_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key + ": bad integer '" + v + "'");
  return x;
}

std::uint64_t want_uint(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || v.find('-') != std::string::npos)
    throw ConfigError(key + ": bad unsigned integer '" + v + "'");
  return x;
}

std::vector<std::size_t> want_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const std::string& s : split_list(v)) {
    const std::int64_t x = want_int(key, s);
    if (x < 1) throw ConfigError(key + ": entries must be positive");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda < 0) throw ConfigError("lambda must be non-negative");
  if (alpha_d < 0 || alpha_g < 0) throw ConfigError("alpha_d/alpha_g must be non-negative");
  if (n_critic < 1) throw ConfigError("n_critic must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (adam.lr <= 0) throw ConfigError("adam.lr must be positive");
  if (adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1)
    throw ConfigError("adam betas must lie in [0,1)");
  if (kmeans_threshold < 2) throw ConfigError("kmeans_threshold must be at least 2");
  if (clustering_restarts < 1) throw ConfigError("clustering.restarts must be positive");
  if (clustering_rounds < 0) throw ConfigError("clustering.rounds must be non-negative");
  if (clustering_every_epochs <= 0)
    throw ConfigError("clustering.every_epochs must be positive");
  for (std::size_t i = 1; i < clustering_iterations.size(); ++i)
    if (clustering_iterations[i] <= clustering_iterations[i - 1])
      throw ConfigError("clustering.iterations must be strictly increasing");
  for (std::int64_t it : clustering_iterations)
    if (it < 1) throw ConfigError("clustering.iterations entries must be positive");
  const bool wants_splitting =
      !clustering_iterations.empty() || (clustering_auto && clustering_rounds > 0);
  if (loss == LossMode::Gan && wants_splitting)
    throw ConfigError("class splitting requires loss = wgan-gp");
  if (eval_cadence < 1) throw ConfigError("eval.cadence must be positive");
  if (eval_samples < 1) throw ConfigError("eval.samples must be positive");
  if (latent_dim < 1) throw ConfigError("model.latent_dim must be positive");
  if (gen_hidden.empty() || critic_hidden.empty())
    throw ConfigError("model hidden layer lists must not be empty");
}

void TrainConfig::resolve_clustering(std::size_t dataset_size) {
  if (!clustering_auto) return;
  clustering_iterations.clear();
  if (clustering_rounds <= 0 || dataset_size == 0) {
    clustering_auto = false;
    return;
  }
  const double per_epoch =
      std::ceil(static_cast<double>(dataset_size) / static_cast<double>(batch_size));
  for (int k = 1; k <= clustering_rounds; ++k) {
    const std::int64_t it = static_cast<std::int64_t>(
        std::llround(clustering_every_epochs * per_epoch * k));
    if (it >= 1 && it <= iterations) clustering_iterations.push_back(it);
  }
  clustering_auto = false;
}

std::string TrainConfig::echo() const {
  std::ostringstream os;
  os << "loss = " << to_string(loss) << "\n";
  os << "lambda = " << fmt_double(lambda) << "\n";
  os << "alpha_d = " << fmt_double(alpha_d) << "\n";
  os << "alpha_g = " << fmt_double(alpha_g) << "\n";
  os << "n_critic = " << n_critic << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "iterations = " << iterations << "\n";
  os << "kmeans_threshold = " << kmeans_threshold << "\n";
  os << "adam.lr = " << fmt_double(adam.lr) << "\n";
  os << "adam.beta1 = " << fmt_double(adam.beta1) << "\n";
  os << "adam.beta2 = " << fmt_double(adam.beta2) << "\n";
  if (clustering_auto) {
    os << "clustering.iterations = auto\n";
  } else if (clustering_iterations.empty()) {
    os << "clustering.iterations = none\n";
  } else {
    os << "clustering.iterations = ";
    for (std::size_t i = 0; i < clustering_iterations.size(); ++i) {
      if (i) os << ',';
      os << clustering_iterations[i];
    }
    os << "\n";
  }
  os << "clustering.every_epochs = " << fmt_double(clustering_every_epochs) << "\n";
  os << "clustering.rounds = " << clustering_rounds << "\n";
  os << "clustering.restarts = " << clustering_restarts << "\n";
  os << "clustering.normalization = " << split::to_string(clustering_normalization) << "\n";
  os << "eval.cadence = " << eval_cadence << "\n";
  os << "eval.samples = " << eval_samples << "\n";
  os << "eval.class_sampling = " << to_string(eval_class_sampling) << "\n";
  os << "model.latent_dim = " << latent_dim << "\n";
  os << "model.gen_hidden = " << join_sizes(gen_hidden) << "\n";
  os << "model.critic_hidden = " << join_sizes(critic_hidden) << "\n";
  os << "model.latent = " << net::to_string(latent) << "\n";
  os << "seeds.data = " << seed_data << "\n";
  os << "seeds.model = " << seed_model << "\n";
  os << "seeds.training = " << seed_training << "\n";
  os << "seeds.clustering = " << seed_clustering << "\n";
  return os.str();
}

TrainConfig TrainConfig::parse_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::map<std::string, std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (!seen.emplace(key, val).second)
      throw ConfigError("duplicate key '" + key + "'");

    if (key == "loss") {
      if (val == "gan") cfg.loss = LossMode::Gan;
      else if (val == "wgan-gp") cfg.loss = LossMode::WganGp;
      else throw ConfigError("loss must be 'gan' or 'wgan-gp', got '" + val + "'");
    } else if (key == "lambda") cfg.lambda = want_double(key, val);
    else if (key == "alpha_d") cfg.alpha_d = want_double(key, val);
    else if (key == "alpha_g") cfg.alpha_g = want_double(key, val);
    else if (key == "n_critic") cfg.n_critic = static_cast<int>(want_int(key, val));
    else if (key == "batch_size") cfg.batch_size = static_cast<std::size_t>(want_int(key, val));
    else if (key == "iterations") cfg.iterations = want_int(key, val);
    else if (key == "kmeans_threshold")
      cfg.kmeans_threshold = static_cast<std::size_t>(want_int(key, val));
    else if (key == "adam.lr") cfg.adam.lr = want_double(key, val);
    else if (key == "adam.beta1") cfg.adam.beta1 = want_double(key, val);
    else if (key == "adam.beta2") cfg.adam.beta2 = want_double(key, val);
    else if (key == "clustering.iterations") {
      if (val == "auto") {
        cfg.clustering_auto = true;
        cfg.clustering_iterations.clear();
      } else if (val == "none") {
        cfg.clustering_auto = false;
        cfg.clustering_iterations.clear();
      } else {
        cfg.clustering_auto = false;
        cfg.clustering_iterations.clear();
        for (const std::string& s : split_list(val))
          cfg.clustering_iterations.push_back(want_int(key, s));
      }
    } else if (key == "clustering.every_epochs")
      cfg.clustering_every_epochs = want_double(key, val);
    else if (key == "clustering.rounds")
      cfg.clustering_rounds = static_cast<int>(want_int(key, val));
    else if (key == "clustering.restarts")
      cfg.clustering_restarts = static_cast<int>(want_int(key, val));
    else if (key == "clustering.normalization")
      cfg.clustering_normalization = split::normalization_from_string(val);
    else if (key == "eval.cadence") cfg.eval_cadence = want_int(key, val);
    else if (key == "eval.samples") cfg.eval_samples = static_cast<std::size_t>(want_int(key, val));
    else if (key == "eval.class_sampling") {
      if (val == "uniform-leaves") cfg.eval_class_sampling = ClassSampling::UniformLeaves;
      else if (val == "empirical-frequencies")
        cfg.eval_class_sampling = ClassSampling::EmpiricalFrequencies;
      else throw ConfigError("eval.class_sampling must be 'uniform-leaves' or "
                             "'empirical-frequencies', got '" + val + "'");
    } else if (key == "model.latent_dim")
      cfg.latent_dim = static_cast<std::size_t>(want_int(key, val));
    else if (key == "model.gen_hidden") cfg.gen_hidden = want_size_list(key, val);
    else if (key == "model.critic_hidden") cfg.critic_hidden = want_size_list(key, val);
    else if (key == "model.latent") cfg.latent = net::latent_kind_from_string(val);
    else if (key == "seeds.data") cfg.seed_data = want_uint(key, val);
    else if (key == "seeds.model") cfg.seed_model = want_uint(key, val);
    else if (key == "seeds.training") cfg.seed_training = want_uint(key, val);
    else if (key == "seeds.clustering") cfg.seed_clustering = want_uint(key, val);
    else throw ConfigError("unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_text(os.str());
}

}  // namespace splitgan::run
