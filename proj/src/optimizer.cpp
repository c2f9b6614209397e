#include "r3/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace r3 {

std::string_view to_string(StdMode mode) { return mode == StdMode::Population ? "population" : "sample"; }

StdMode std_mode_from_string(std::string_view text) {
  if (text == "population") return StdMode::Population;
  if (text == "sample") return StdMode::Sample;
  throw ValidationError("unknown std mode '" + std::string(text) + "'");
}

void AdvantageParams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("opt.alpha must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("opt.lambda must be non-negative");
}

AdvantageBatch group_advantages(std::span<const double> rewards, const AdvantageParams& params) {
  params.validate();
  if (rewards.empty()) throw ValidationError("advantages need at least one reward");
  const auto n = static_cast<double>(rewards.size());
  const bool all_equal = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); });
  // Summation rounding must not leak a nonzero numerator into a tied group.
  const double mean = all_equal ? rewards.front() : std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double squares = 0.0;
  for (double r : rewards) squares += (r - mean) * (r - mean);
  double std_dev = 0.0;
  if (params.std_mode == StdMode::Population) {
    std_dev = std::sqrt(squares / n);
  } else if (rewards.size() > 1) {
    std_dev = std::sqrt(squares / (n - 1.0));
  }

  const double denom = params.alpha * std_dev + params.lambda;
  AdvantageBatch batch{std::vector<double>(rewards.begin(), rewards.end()), {}, mean, std_dev};
  batch.advantages.reserve(rewards.size());
  if (denom == 0.0) {
    // Zero spread: the numerators are all zero too, but 0/0 is undefined.
    throw DegenerateGroupError("zero reward variance with lambda = 0");
  }
  for (double r : rewards) batch.advantages.push_back((r - mean) / denom);
  return batch;
}

void ObjectiveParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("opt.epsilon must lie in (0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("opt.beta must be non-negative");
}

namespace {

void check_member(const ObjectiveMember& m) {
  if (m.response.empty()) throw ValidationError("objective member has an empty response");
  if (m.response.size() != m.behavior_logprobs.size()) {
    throw ValidationError("response and behavior_logprobs differ in length");
  }
  if (!std::isfinite(m.advantage)) throw ValidationError("objective member has a non-finite advantage");
}

double kl_divergence(std::span<const double> p, std::span<const double> log_p, std::span<const double> log_q) {
  double kl = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] > 0.0) kl += p[v] * (log_p[v] - log_q[v]);
  }
  return kl;
}

struct TokenTerm {
  double value;
  double ratio_coeff;  // multiplies grad log pi(a)
  double kl_coeff;     // multiplies grad KL
};

TokenTerm token_term(double log_prob, double behavior_logprob, double advantage, double kl,
                     const ObjectiveParams& params) {
  const double ratio = std::exp(log_prob - behavior_logprob);
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - params.epsilon, 1.0 + params.epsilon) * advantage;
  const bool in_bounds = ratio >= 1.0 - params.epsilon && ratio <= 1.0 + params.epsilon;
  if (!params.kl_inside_min) {
    const bool take_unclipped = unclipped <= clipped;
    return {std::min(unclipped, clipped) - params.beta * kl, take_unclipped ? unclipped : 0.0, -params.beta};
  }
  const double rhs = clipped - params.beta * kl;
  if (unclipped <= rhs) return {unclipped, unclipped, 0.0};
  return {rhs, in_bounds ? unclipped : 0.0, -params.beta};
}

}  // namespace

double surrogate_objective(const Policy& policy, const ObjectiveGroup& group, const Policy& reference,
                           const ObjectiveParams& params) {
  params.validate();
  if (group.members.empty()) throw ValidationError("objective group has no members");
  if (policy.vocab_size() != reference.vocab_size()) throw ValidationError("policy and reference vocabularies differ");

  const std::size_t vocab = policy.vocab_size();
  std::vector<double> p(vocab), q(vocab), log_p(vocab), log_q(vocab);
  double total = 0.0;
  for (const auto& m : group.members) {
    check_member(m);
    std::vector<Token> prefix(m.prompt.begin(), m.prompt.end());
    double member_sum = 0.0;
    for (std::size_t t = 0; t < m.response.size(); ++t) {
      policy.distribution(group.cls, prefix, p);
      reference.distribution(group.cls, prefix, q);
      for (std::size_t v = 0; v < vocab; ++v) {
        log_p[v] = std::log(p[v]);
        log_q[v] = std::log(q[v]);
      }
      const auto a = static_cast<std::size_t>(m.response[t]);
      if (a >= vocab) throw ValidationError("response token outside the vocabulary");
      const double kl = params.beta > 0.0 ? kl_divergence(p, log_p, log_q) : 0.0;
      member_sum += token_term(log_p[a], m.behavior_logprobs[t], m.advantage, kl, params).value;
      prefix.push_back(m.response[t]);
    }
    total += member_sum / static_cast<double>(m.response.size());
  }
  return total / static_cast<double>(group.members.size());
}

LogitGradient objective_gradient(const TabularPolicy& policy, const ObjectiveGroup& group,
                                 const TabularPolicy& reference, const ObjectiveParams& params) {
  params.validate();
  if (group.members.empty()) throw ValidationError("objective group has no members");
  const std::size_t vocab = policy.vocab_size();
  if (reference.vocab_size() != vocab) throw ValidationError("policy and reference vocabularies differ");

  LogitGradient gradient;
  std::vector<double> p(vocab), log_p(vocab), log_q(vocab);
  const double group_weight = 1.0 / static_cast<double>(group.members.size());
  for (const auto& m : group.members) {
    check_member(m);
    const double weight = group_weight / static_cast<double>(m.response.size());
    std::vector<Token> prefix(m.prompt.begin(), m.prompt.end());
    for (std::size_t t = 0; t < m.response.size(); ++t) {
      const auto key = policy.context(group.cls, prefix);
      const auto z = policy.logits(key);
      const auto z_ref = reference.logits(key);
      softmax(z, p);
      log_softmax(z, log_p);
      log_softmax(z_ref, log_q);
      const auto a = static_cast<std::size_t>(m.response[t]);
      if (a >= vocab) throw ValidationError("response token outside the vocabulary");

      const double kl = params.beta > 0.0 ? kl_divergence(p, log_p, log_q) : 0.0;
      const auto term = token_term(log_p[a], m.behavior_logprobs[t], m.advantage, kl, params);

      auto [it, inserted] = gradient.try_emplace(key, vocab, 0.0);
      auto& g = it->second;
      if (term.ratio_coeff != 0.0) {
        // d log softmax(z)[a] / dz_u = 1[u == a] - p_u
        for (std::size_t u = 0; u < vocab; ++u) g[u] -= weight * term.ratio_coeff * p[u];
        g[a] += weight * term.ratio_coeff;
      }
      if (term.kl_coeff != 0.0) {
        // d KL / dz_u = p_u (log p_u - log q_u - KL)
        for (std::size_t u = 0; u < vocab; ++u) {
          if (p[u] > 0.0) g[u] += weight * term.kl_coeff * p[u] * (log_p[u] - log_q[u] - kl);
        }
      }
      prefix.push_back(m.response[t]);
    }
  }
  return gradient;
}

void apply_update(TabularPolicy& policy, const LogitGradient& gradient, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  std::vector<double> step(policy.vocab_size());
  for (const auto& [key, g] : gradient) {
    if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) continue;
    for (std::size_t v = 0; v < g.size(); ++v) step[v] = learning_rate * g[v];
    policy.add_logits(key, step);
  }
}

void accumulate(LogitGradient& into, const LogitGradient& gradient) {
  for (const auto& [key, g] : gradient) {
    auto [it, inserted] = into.try_emplace(key, g);
    if (!inserted) {
      for (std::size_t v = 0; v < g.size(); ++v) it->second[v] += g[v];
    }
  }
}

double gradient_norm(const LogitGradient& gradient) {
  double sq = 0.0;
  for (const auto& [key, g] : gradient) {
    for (double x : g) sq += x * x;
  }
  return std::sqrt(sq);
}

}  // namespace r3
