#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace splitgan {

/// Deterministic random source. Wraps std::mt19937_64 but does all value
/// transforms itself (no std::*_distribution) so streams are bit-identical
/// across standard libraries, and the full state serializes into checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t bits();                 // raw 64 bits
  double uniform01();                   // [0,1) with 53-bit resolution
  double uniform(double a, double b);   // [a,b)
  double normal();                      // standard normal, Box-Muller
  /// Uniform index in [0,n). n==1 returns 0 without consuming the stream,
  /// so a one-class draw is a no-op for reproducibility comparisons.
  std::size_t index(std::size_t n);

  std::string serialize() const;
  static Rng deserialize(const std::string& s);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; stateless seed derivation for sub-streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace splitgan
