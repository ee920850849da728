#include "splitgan/rng.hpp"

#include <cmath>
#include <sstream>

#include "splitgan/errors.hpp"

namespace splitgan {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::bits() { return engine_(); }

double Rng::uniform01() {
  return static_cast<double>(bits() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform01(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 nudged away from 0 so log stays finite.
  double u1 = uniform01();
  double u2 = uniform01();
  if (u1 < 1e-300) u1 = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("rng.index: n must be positive");
  if (n == 1) return 0;
  // Rejection sampling for an unbiased draw.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = bits();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0);
  if (has_spare_) {
    os << ' ';
    os.precision(17);
    os << std::hexfloat << spare_;
  }
  return os.str();
}

Rng Rng::deserialize(const std::string& s) {
  Rng r;
  std::istringstream is(s);
  int spare_flag = 0;
  is >> r.engine_ >> spare_flag;
  if (!is) throw ParseError("rng state: malformed");
  r.has_spare_ = spare_flag != 0;
  if (r.has_spare_) {
    is >> std::hexfloat >> r.spare_;
    if (!is) throw ParseError("rng state: missing spare value");
  }
  return r;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9E3779B97F4A7C15ull));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

}  // namespace splitgan
