#ifndef HETVR_SAMPLING_HPP
#define HETVR_SAMPLING_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hetvr/types.hpp"

namespace hetvr {

/// xoshiro256** seeded through SplitMix64.
///
/// Both algorithms are the published reference versions (Blackman & Vigna),
/// so a given 64-bit seed yields the same stream on every platform. Doubles
/// are drawn from the top 53 bits.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal via Box-Muller (no cached second value).
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// One SplitMix64 output step; used for seeding and seed derivation.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for the run with the given index in a batch sharing `base`.
/// Defined as the first SplitMix64 output from state
/// base ^ (0x9E3779B97F4A7C15 * (run_index + 1)).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run_index);

/// Discrete distribution over component indices [0, m).
class SamplingDistribution {
 public:
  /// Takes unnormalized positive weights and normalizes them.
  explicit SamplingDistribution(std::vector<double> weights);

  Index size() const { return probabilities_.size(); }
  double probability(Index i) const { return probabilities_[i]; }
  std::span<const double> probabilities() const { return probabilities_; }
  std::span<const double> cumulative() const { return cumulative_; }

  /// Inverse-CDF draw by binary search on the cumulative table.
  Index sample(SeededRng& rng) const;

 private:
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

/// pi_i = sqrt(L_i) / (2 sum_j sqrt(L_j)) + 1/(2m).
SamplingDistribution ssnm_distribution(std::span<const double> smoothness);

/// pi_i = B_i L_i / sum_j B_j L_j.
SamplingDistribution katyusha_distribution(std::span<const double> upper_partials,
                                           std::span<const double> smoothness);

/// pi_i = l_i / sum_j l_j.
SamplingDistribution reduced_distribution(std::span<const double> reduced_smoothness);

SamplingDistribution uniform_distribution(Index m);

}  // namespace hetvr

#endif  // HETVR_SAMPLING_HPP
