#include "splitgan/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "splitgan/errors.hpp"

namespace splitgan::run {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

enum class SectionKind : std::uint8_t { F64 = 0, I64 = 1, Bytes = 2 };

struct Section {
  SectionKind kind;
  std::vector<std::size_t> dims;  // tensors only
  std::vector<double> f64;
  std::vector<std::int64_t> i64;
  std::string bytes;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw ParseError(path + ": truncated checkpoint (wanted " + std::to_string(n) +
                       " bytes at offset " + std::to_string(pos) + ")");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

class Container {
 public:
  void add_f64(const std::string& name, const Tensor& t) {
    Section s;
    s.kind = SectionKind::F64;
    s.dims = t.shape();
    s.f64.assign(t.data(), t.data() + t.size());
    insert(name, std::move(s));
  }
  void add_i64(const std::string& name, std::vector<std::int64_t> v) {
    Section s;
    s.kind = SectionKind::I64;
    s.dims = {v.size()};
    s.i64 = std::move(v);
    insert(name, std::move(s));
  }
  void add_scalar_i64(const std::string& name, std::int64_t v) { add_i64(name, {v}); }
  void add_scalar_f64(const std::string& name, double v) {
    add_f64(name, Tensor({1}, {v}));
  }
  void add_bytes(const std::string& name, std::string b) {
    Section s;
    s.kind = SectionKind::Bytes;
    s.bytes = std::move(b);
    insert(name, std::move(s));
  }

  std::string encode() const {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(sections_.size()));
    for (const auto& [name, s] : sections_) {  // std::map: sorted, canonical
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      out.push_back(static_cast<char>(s.kind));
      if (s.kind == SectionKind::Bytes) {
        put_u64(out, s.bytes.size());
        out += s.bytes;
      } else {
        out.push_back(static_cast<char>(s.dims.size()));
        for (std::size_t d : s.dims) put_u64(out, d);
        if (s.kind == SectionKind::F64)
          for (double v : s.f64) put_f64(out, v);
        else
          for (std::int64_t v : s.i64) put_u64(out, static_cast<std::uint64_t>(v));
      }
    }
    return out;
  }

  static Container decode(const std::string& buf, const std::string& path) {
    Reader r{buf, 0, path};
    const std::string magic = r.str(sizeof kMagic);
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0)
      throw ParseError(path + ": not a checkpoint file");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
      throw CheckpointVersionError(path + ": version " + std::to_string(version) +
                                   " unsupported (expected " + std::to_string(kVersion) + ")");
    const std::uint32_t count = r.u32();
    Container c;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t name_len = r.u32();
      const std::string name = r.str(name_len);
      Section s;
      r.need(1);
      s.kind = static_cast<SectionKind>(buf[r.pos++]);
      if (s.kind == SectionKind::Bytes) {
        s.bytes = r.str(r.u64());
      } else {
        r.need(1);
        const std::size_t rank = static_cast<unsigned char>(buf[r.pos++]);
        std::size_t n = 1;
        for (std::size_t d = 0; d < rank; ++d) {
          s.dims.push_back(r.u64());
          n *= s.dims.back();
        }
        if (s.kind == SectionKind::F64) {
          s.f64.reserve(n);
          for (std::size_t k = 0; k < n; ++k) s.f64.push_back(r.f64());
        } else {
          s.i64.reserve(n);
          for (std::size_t k = 0; k < n; ++k)
            s.i64.push_back(static_cast<std::int64_t>(r.u64()));
        }
      }
      c.sections_.emplace(name, std::move(s));
    }
    if (r.pos != buf.size())
      throw ParseError(path + ": trailing bytes after last section");
    return c;
  }

  const Section& get(const std::string& name, const std::string& path) const {
    auto it = sections_.find(name);
    if (it == sections_.end())
      throw ParseError(path + ": missing section '" + name + "'");
    return it->second;
  }

  Tensor tensor(const std::string& name, const std::string& path) const {
    const Section& s = get(name, path);
    if (s.kind != SectionKind::F64)
      throw ParseError(path + ": section '" + name + "' is not a float tensor");
    return Tensor(s.dims, s.f64);
  }
  std::vector<std::int64_t> ints(const std::string& name, const std::string& path) const {
    const Section& s = get(name, path);
    if (s.kind != SectionKind::I64)
      throw ParseError(path + ": section '" + name + "' is not an int tensor");
    return s.i64;
  }
  std::string bytes(const std::string& name, const std::string& path) const {
    const Section& s = get(name, path);
    if (s.kind != SectionKind::Bytes)
      throw ParseError(path + ": section '" + name + "' is not a byte blob");
    return s.bytes;
  }

 private:
  void insert(const std::string& name, Section s) { sections_.emplace(name, std::move(s)); }
  std::map<std::string, Section> sections_;
};

void add_param(Container& c, const net::Param& p) {
  c.add_f64(p.name, p.value);
  c.add_f64(p.name + ".m", p.m);
  c.add_f64(p.name + ".v", p.v);
  c.add_scalar_i64(p.name + ".steps", p.steps);
}

void read_param(const Container& c, net::Param& p, const std::string& path) {
  const Tensor value = c.tensor(p.name, path);
  if (!value.same_shape(p.value))
    throw ParseError(path + ": parameter '" + p.name + "' has shape " +
                     value.shape_str() + ", expected " + p.value.shape_str());
  p.value = value;
  p.m = c.tensor(p.name + ".m", path);
  p.v = c.tensor(p.name + ".v", path);
  p.steps = c.ints(p.name + ".steps", path).at(0);
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  Container c;
  c.add_bytes("config", state.config.echo());
  c.add_bytes("tree", state.tree.serialize());
  c.add_bytes("rng.training", state.training_rng.serialize());
  c.add_scalar_i64("meta.iteration", state.iteration);
  c.add_scalar_i64("meta.data_dim", static_cast<std::int64_t>(state.generator.config().out_dim));
  c.add_scalar_f64("meta.best_score", state.best_score);
  c.add_scalar_i64("meta.best_iteration", state.best_iteration);
  c.add_i64("labels",
            std::vector<std::int64_t>(state.dataset_labels.begin(),
                                      state.dataset_labels.end()));
  {
    std::vector<std::int64_t> ids;
    for (std::int32_t id : state.generator.class_index().ids()) ids.push_back(id);
    c.add_i64("classes.active", std::move(ids));
  }
  const net::Generator& g = state.generator;
  for (const net::Param& p : g.weights_) add_param(c, p);
  for (const net::Param& p : g.biases_) add_param(c, p);
  for (std::size_t i = 0; i < g.norms().size(); ++i) {
    const net::ConditionalNorm& n = g.norms()[i];
    const std::string prefix = "gen.norm" + std::to_string(i);
    add_param(c, n.delta_gamma);
    add_param(c, n.delta_beta);
    c.add_f64(prefix + ".gamma_base", n.gamma_base);
    c.add_f64(prefix + ".beta_base", n.beta_base);
    c.add_f64(prefix + ".running_mean", n.running_mean);
    c.add_f64(prefix + ".running_var", n.running_var);
  }
  const net::Critic& cr = state.critic;
  for (const net::Param& p : cr.weights_) add_param(c, p);
  for (const net::Param& p : cr.biases_) add_param(c, p);
  add_param(c, cr.score_w_);
  add_param(c, cr.score_b_);
  add_param(c, cr.head_w_);
  add_param(c, cr.head_b_);

  const std::string blob = c.encode();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) throw IoError("write failed for checkpoint " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path);
  std::ostringstream os;
  os << f.rdbuf();
  const std::string blob = os.str();
  Container c = Container::decode(blob, path);

  TrainState state;
  state.config = TrainConfig::parse_text(c.bytes("config", path));
  state.tree = split::ClassTree::deserialize(c.bytes("tree", path));
  state.training_rng = Rng::deserialize(c.bytes("rng.training", path));
  state.iteration = c.ints("meta.iteration", path).at(0);
  state.best_score = c.tensor("meta.best_score", path).item();
  state.best_iteration = c.ints("meta.best_iteration", path).at(0);
  for (std::int64_t l : c.ints("labels", path))
    state.dataset_labels.push_back(static_cast<std::int32_t>(l));

  std::vector<std::int32_t> active;
  for (std::int64_t id : c.ints("classes.active", path))
    active.push_back(static_cast<std::int32_t>(id));
  if (active != state.tree.leaves())
    throw ParseError(path + ": active class list disagrees with the class tree");
  const std::size_t k = active.size();

  const TrainConfig& cfg = state.config;
  const std::size_t data_dim =
      static_cast<std::size_t>(c.ints("meta.data_dim", path).at(0));
  Rng scratch(0);  // placeholder init; every tensor is overwritten below
  net::GeneratorConfig gcfg{cfg.latent_dim, cfg.gen_hidden, data_dim, 0.2};
  net::CriticConfig ccfg{data_dim, cfg.critic_hidden, 0.2};
  state.generator = net::Generator(gcfg, k, scratch);
  state.critic = net::Critic(ccfg, k, scratch);
  state.generator.set_class_index(net::ClassIndex(active));
  state.critic.set_class_index(net::ClassIndex(active));

  net::Generator& g = state.generator;
  for (net::Param& p : g.weights_) read_param(c, p, path);
  for (net::Param& p : g.biases_) read_param(c, p, path);
  for (std::size_t i = 0; i < g.norms().size(); ++i) {
    net::ConditionalNorm& n = g.norms()[i];
    const std::string prefix = "gen.norm" + std::to_string(i);
    read_param(c, n.delta_gamma, path);
    read_param(c, n.delta_beta, path);
    n.gamma_base = c.tensor(prefix + ".gamma_base", path);
    n.beta_base = c.tensor(prefix + ".beta_base", path);
    n.running_mean = c.tensor(prefix + ".running_mean", path);
    n.running_var = c.tensor(prefix + ".running_var", path);
  }
  net::Critic& cr = state.critic;
  for (net::Param& p : cr.weights_) read_param(c, p, path);
  for (net::Param& p : cr.biases_) read_param(c, p, path);
  read_param(c, cr.score_w_, path);
  read_param(c, cr.score_b_, path);
  read_param(c, cr.head_w_, path);
  read_param(c, cr.head_b_, path);
  return state;
}

}  // namespace splitgan::run
