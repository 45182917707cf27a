#include "hetvr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace hetvr {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

void require_positive(std::span<const double> values, const char* what) {
  if (values.empty()) {
    throw InvariantError(std::string(what) + ": empty list");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw InvariantError(std::string(what) + ": entry " + std::to_string(i) +
                           " is not a positive finite number");
    }
  }
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run_index) {
  std::uint64_t state = base ^ (0x9E3779B97F4A7C15ULL * (run_index + 1));
  return splitmix64(state);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection keeps the draw unbiased.
  unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(product);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

SamplingDistribution::SamplingDistribution(std::vector<double> weights)
    : probabilities_(std::move(weights)) {
  require_positive(probabilities_, "sampling distribution");
  const double total = std::accumulate(probabilities_.begin(), probabilities_.end(), 0.0);
  for (double& p : probabilities_) p /= total;
  cumulative_.resize(probabilities_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < probabilities_.size(); ++i) {
    running += probabilities_[i];
    cumulative_[i] = running;
  }
  cumulative_.back() = 1.0;
}

Index SamplingDistribution::sample(SeededRng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto idx = static_cast<Index>(it - cumulative_.begin());
  return std::min(idx, cumulative_.size() - 1);
}

SamplingDistribution ssnm_distribution(std::span<const double> smoothness) {
  require_positive(smoothness, "ssnm_distribution");
  const double m = static_cast<double>(smoothness.size());
  double root_sum = 0.0;
  for (double l : smoothness) root_sum += std::sqrt(l);
  std::vector<double> pi(smoothness.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    pi[i] = std::sqrt(smoothness[i]) / (2.0 * root_sum) + 1.0 / (2.0 * m);
  }
  return SamplingDistribution(std::move(pi));
}

SamplingDistribution katyusha_distribution(std::span<const double> upper_partials,
                                           std::span<const double> smoothness) {
  require_positive(upper_partials, "katyusha_distribution (B)");
  require_positive(smoothness, "katyusha_distribution (L)");
  if (upper_partials.size() != smoothness.size()) {
    throw InvariantError("katyusha_distribution: B and L differ in length");
  }
  std::vector<double> w(smoothness.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = upper_partials[i] * smoothness[i];
  return SamplingDistribution(std::move(w));
}

SamplingDistribution reduced_distribution(std::span<const double> reduced_smoothness) {
  require_positive(reduced_smoothness, "reduced_distribution");
  return SamplingDistribution(
      std::vector<double>(reduced_smoothness.begin(), reduced_smoothness.end()));
}

SamplingDistribution uniform_distribution(Index m) {
  if (m == 0) throw InvariantError("uniform_distribution: empty list");
  return SamplingDistribution(std::vector<double>(m, 1.0));
}

}  // namespace hetvr
