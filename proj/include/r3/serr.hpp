#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace r3::serr {

/// Entropy structure of one response.
struct EntropyProfile {
  double peak = 0.0;    // mean of the k_top largest token entropies
  double global = 0.0;  // mean over all tokens
  std::size_t k_top = 1;
  std::size_t length = 1;
};

struct SerrParams {
  double p = 0.2;      // fraction of tokens treated as forking points
  double r_max = 0.5;  // reward of the top-ranked response

  void validate() const;
};

// Shannon entropy in nats, with 0 ln 0 = 0. The distribution must sum to 1
// within 1e-9.
double token_entropy(std::span<const double> distribution);

// k_top = max(1, floor(p * L)).
std::size_t top_count(std::size_t length, double p);

EntropyProfile profile(std::span<const double> entropies, double p);

// a dominates b iff a.peak > b.peak and a.global < b.global.
bool dominates(const EntropyProfile& a, const EntropyProfile& b);

// S_i = number of profiles that profile i dominates.
std::vector<std::size_t> dominance_scores(std::span<const EntropyProfile> profiles);

// Linear rank rewards R_max * (1 - k / (N - 1)) with rank 0 for the highest
// score. Tied scores share the mean reward of the rank slots they occupy.
// A single sample gets R_max.
std::vector<double> rank_rewards(std::span<const std::size_t> scores, double r_max);

// profile -> dominance_scores -> rank_rewards over one group of traces.
std::vector<double> rewards_for_traces(std::span<const std::vector<double>> entropy_traces, const SerrParams& params);

}  // namespace r3::serr
