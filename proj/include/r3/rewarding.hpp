#pragma once

#include <cstddef>
#include <span>

#include "r3/core.hpp"

namespace r3 {

struct RewardSpec {
  double correct_reward = 1.0;
  std::size_t length_max = 32;
  bool length_bonus_enabled = true;
  double serr_rmax = 0.5;

  // L_max >= 1 and 0 < R_max < correct_reward.
  void validate() const;
};

// Decides whether a response answers a query. Swap in a richer checker by
// implementing this interface.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual bool verify(std::span<const Token> response, std::span<const Token> gold) const = 0;
};

// A response is correct when it ends with the terminator and the tokens before
// the terminator are exactly the gold answer.
class ExactMatchVerifier final : public Verifier {
 public:
  bool verify(std::span<const Token> response, std::span<const Token> gold) const override;
};

bool verify(std::span<const Token> response, std::span<const Token> gold);

// max(0, 1 - l / L_max)
double length_bonus(std::size_t length, std::size_t length_max);

// Outcome reward: correct_reward (+ length bonus) when verified, 0 otherwise.
double total_reward(std::span<const Token> response, std::span<const Token> gold, const RewardSpec& spec,
                    const Verifier& verifier);
double total_reward(std::span<const Token> response, std::span<const Token> gold, const RewardSpec& spec);

}  // namespace r3
