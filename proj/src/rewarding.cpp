#include "r3/rewarding.hpp"

#include <algorithm>
#include <cmath>

namespace r3 {

void RewardSpec::validate() const {
  if (length_max < 1) throw ValidationError("reward.l_max must be at least 1");
  if (!std::isfinite(correct_reward) || correct_reward <= 0.0) {
    throw ValidationError("reward.correct must be positive");
  }
  if (!(serr_rmax > 0.0 && serr_rmax < correct_reward)) {
    throw ValidationError("reward.serr_rmax must lie in (0, reward.correct)");
  }
}

bool ExactMatchVerifier::verify(std::span<const Token> response, std::span<const Token> gold) const {
  if (gold.empty()) throw ValidationError("gold answer must be non-empty");
  if (response.empty() || response.back() != kTerminator) return false;
  const auto answer = response.first(response.size() - 1);
  return std::equal(answer.begin(), answer.end(), gold.begin(), gold.end());
}

bool verify(std::span<const Token> response, std::span<const Token> gold) {
  return ExactMatchVerifier{}.verify(response, gold);
}

double length_bonus(std::size_t length, std::size_t length_max) {
  if (length < 1) throw ValidationError("length bonus requires a length of at least 1");
  if (length_max < 1) throw ValidationError("length bonus requires L_max >= 1");
  return std::max(0.0, 1.0 - static_cast<double>(length) / static_cast<double>(length_max));
}

double total_reward(std::span<const Token> response, std::span<const Token> gold, const RewardSpec& spec,
                    const Verifier& verifier) {
  if (!verifier.verify(response, gold)) return 0.0;
  double reward = spec.correct_reward;
  if (spec.length_bonus_enabled) reward += length_bonus(response.size(), spec.length_max);
  return reward;
}

double total_reward(std::span<const Token> response, std::span<const Token> gold, const RewardSpec& spec) {
  return total_reward(response, gold, spec, ExactMatchVerifier{});
}

}  // namespace r3
