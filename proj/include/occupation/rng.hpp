#pragma once

#include <boost/random/normal_distribution.hpp>
#include <cstdint>
#include <random>
#include <string_view>

namespace occupation {

/// Reproducible random stream identified by (master seed, stream index).
///
/// The engine is mt19937_64 seeded through std::seed_seq from both 64-bit
/// words split into halves plus an algorithm tag, so nearby seeds and nearby
/// stream indices give unrelated states. Normals use Boost's ziggurat, whose
/// output (unlike std::normal_distribution) is fixed across standard libraries.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+seed_seq/ziggurat";

  RngStream(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }
  std::uint64_t poisson(double mean);
  /// +1 or -1 with probability 1/2 each.
  int sign() { return (engine_() >> 63) != 0 ? 1 : -1; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace occupation
