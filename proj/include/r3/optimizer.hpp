#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "r3/core.hpp"
#include "r3/policy.hpp"

namespace r3 {

enum class StdMode { Population, Sample };

std::string_view to_string(StdMode mode);
StdMode std_mode_from_string(std::string_view text);

struct AdvantageParams {
  double alpha = 1.5;    // damping on the std of mixed groups
  double lambda = 1e-4;  // stability constant
  StdMode std_mode = StdMode::Population;

  void validate() const;
};

struct AdvantageBatch {
  std::vector<double> rewards;
  std::vector<double> advantages;
  double group_mean = 0.0;
  double group_std = 0.0;
};

/// A_i = (R_i - mean) / (alpha * std + lambda). With alpha = 1 and lambda = 0
/// this is the plain group-normalized advantage.
/// Throws DegenerateGroupError when lambda = 0 and every reward is equal.
AdvantageBatch group_advantages(std::span<const double> rewards, const AdvantageParams& params);

struct ObjectiveParams {
  double epsilon = 0.2;  // clip radius
  double beta = 0.0;     // KL(pi || pi_ref) coefficient
  // false: min(r A, clip(r) A) - beta KL   (usual GRPO form)
  // true:  min(r A, clip(r) A - beta KL)
  bool kl_inside_min = false;

  void validate() const;
};

/// One scored response. Spans must outlive the objective call.
struct ObjectiveMember {
  std::span<const Token> prompt;
  std::span<const Token> response;
  std::span<const double> behavior_logprobs;  // pi_old for the importance ratio
  double advantage = 0.0;
};

struct ObjectiveGroup {
  std::string cls;
  std::vector<ObjectiveMember> members;
};

/// Clipped surrogate with KL penalty, averaged over tokens of each member and
/// then over members. Ratios are per token against the stored behavior
/// log-probabilities, for on-policy and replayed members alike.
double surrogate_objective(const Policy& policy, const ObjectiveGroup& group, const Policy& reference,
                           const ObjectiveParams& params);

/// Exact gradient of surrogate_objective with respect to every logit the group
/// touches. At a clip kink the unclipped branch is differentiated.
LogitGradient objective_gradient(const TabularPolicy& policy, const ObjectiveGroup& group,
                                 const TabularPolicy& reference, const ObjectiveParams& params);

// Gradient ascent: logits += learning_rate * gradient.
void apply_update(TabularPolicy& policy, const LogitGradient& gradient, double learning_rate);

void accumulate(LogitGradient& into, const LogitGradient& gradient);
double gradient_norm(const LogitGradient& gradient);

}  // namespace r3
