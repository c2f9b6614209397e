#include "r3/serr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "r3/core.hpp"

namespace r3::serr {

void SerrParams::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("serr.p must lie in (0, 1]");
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw ValidationError("serr.r_max must be positive");
}

double token_entropy(std::span<const double> distribution) {
  if (distribution.empty()) throw ValidationError("entropy of an empty distribution");
  double total = 0.0;
  for (double q : distribution) {
    if (!(q >= 0.0)) throw ValidationError("distribution has a negative or NaN probability");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("distribution does not sum to 1");
  double h = 0.0;
  for (double q : distribution) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::max(0.0, h);
}

std::size_t top_count(std::size_t length, double p) {
  // The 1e-9 guard keeps products such as 0.2 * 5 from flooring to 0.
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(length) + 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(length, 1));
}

EntropyProfile profile(std::span<const double> entropies, double p) {
  if (entropies.empty()) throw ValidationError("entropy profile of an empty trace");
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("selection ratio p must lie in (0, 1]");

  const std::size_t n = entropies.size();
  const std::size_t k = top_count(n, p);
  std::vector<double> sorted(entropies.begin(), entropies.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                    std::greater<>());

  // Averaging deviations from one entry keeps constant traces exact.
  const double base = entropies.front();
  const auto deviation = [base](double acc, double h) { return acc + (h - base); };
  const double top = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0.0, deviation);
  const double all = std::accumulate(entropies.begin(), entropies.end(), 0.0, deviation);
  return EntropyProfile{base + top / static_cast<double>(k), base + all / static_cast<double>(n), k, n};
}

bool dominates(const EntropyProfile& a, const EntropyProfile& b) { return a.peak > b.peak && a.global < b.global; }

namespace {

// Fenwick tree over compressed global-entropy ranks.
class CountTree {
 public:
  explicit CountTree(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t pos) {
    for (++pos; pos < tree_.size(); pos += pos & (~pos + 1)) ++tree_[pos];
  }
  // number of inserted positions <= pos
  std::size_t prefix(std::size_t pos) const {
    std::size_t s = 0;
    for (++pos; pos > 0; pos -= pos & (~pos + 1)) s += tree_[pos];
    return s;
  }

 private:
  std::vector<std::size_t> tree_;
};

}  // namespace

std::vector<std::size_t> dominance_scores(std::span<const EntropyProfile> profiles) {
  const std::size_t n = profiles.size();
  std::vector<std::size_t> scores(n, 0);
  if (n < 2) return scores;

  // S_i counts j with peak_j < peak_i and global_j > global_i. Sweep by
  // ascending peak and query how many strictly-lower-peak profiles have a
  // strictly larger global entropy.
  std::vector<double> globals(n);
  std::transform(profiles.begin(), profiles.end(), globals.begin(), [](const auto& e) { return e.global; });
  std::sort(globals.begin(), globals.end());
  globals.erase(std::unique(globals.begin(), globals.end()), globals.end());
  auto rank_of = [&](double g) {
    return static_cast<std::size_t>(std::lower_bound(globals.begin(), globals.end(), g) - globals.begin());
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return profiles[a].peak < profiles[b].peak; });

  CountTree tree(globals.size());
  std::size_t inserted = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && profiles[order[hi]].peak == profiles[order[lo]].peak) ++hi;
    for (std::size_t t = lo; t < hi; ++t) {
      const auto i = order[t];
      scores[i] = inserted - tree.prefix(rank_of(profiles[i].global));
    }
    for (std::size_t t = lo; t < hi; ++t) tree.add(rank_of(profiles[order[t]].global));
    inserted += hi - lo;
    lo = hi;
  }
  return scores;
}

std::vector<double> rank_rewards(std::span<const std::size_t> scores, double r_max) {
  if (scores.empty()) throw ValidationError("rank rewards need at least one score");
  if (!(r_max > 0.0)) throw ValidationError("R_max must be positive");
  const std::size_t n = scores.size();
  if (n == 1) return {r_max};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double denom = static_cast<double>(n - 1);
  std::vector<double> rewards(n, 0.0);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    // mean of R_max (1 - k / (N - 1)) over slots k in [lo, hi)
    const double mean_rank = 0.5 * static_cast<double>(lo + hi - 1);
    const double reward = r_max * (1.0 - mean_rank / denom);
    for (std::size_t t = lo; t < hi; ++t) rewards[order[t]] = reward;
    lo = hi;
  }
  return rewards;
}

std::vector<double> rewards_for_traces(std::span<const std::vector<double>> entropy_traces,
                                       const SerrParams& params) {
  params.validate();
  std::vector<EntropyProfile> profiles;
  profiles.reserve(entropy_traces.size());
  for (const auto& trace : entropy_traces) profiles.push_back(profile(trace, params.p));
  const auto scores = dominance_scores(profiles);
  return rank_rewards(scores, params.r_max);
}

}  // namespace r3::serr
