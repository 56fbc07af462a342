#include "occupation/rng.hpp"

#include <boost/random/poisson_distribution.hpp>

#include "occupation/errors.hpp"

namespace occupation {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  constexpr std::uint32_t kTag = 0x6f636375;  // distinguishes this layout from other uses
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    kTag};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(seeded_engine(seed, stream)) {}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw ConfigError("Poisson mean must be finite and non-negative");
  }
  if (mean == 0.0) {
    return 0;
  }
  boost::random::poisson_distribution<std::uint64_t, double> dist(mean);
  return dist(engine_);
}

}  // namespace occupation
