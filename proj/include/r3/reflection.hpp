#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r3/buffer.hpp"
#include "r3/core.hpp"
#include "r3/rng.hpp"

namespace r3 {

struct ReflectionTemplate {
  std::vector<Token> guidance;  // p_r, appended after the past failure
  std::size_t history_window = 16;
  double tau = 0.25;                  // hardness threshold on the mean reward
  double positivity_threshold = 1.0;  // rewards below this count as failures
  std::size_t max_prompt_tokens = 0;  // 0 = no context limit

  void validate(double correct_reward) const;
};

/// A query to sample: the original uid plus the tokens to condition on.
struct Query {
  std::string uid;
  std::vector<Token> prompt;
  Origin origin = Origin::OnPolicy;
};

// Hard iff the uid has history and its recent mean reward is below tau.
bool is_hard(std::string_view uid, const SampleBuffer& buffer, const ReflectionTemplate& tmpl);

// q + o_h + p_r, with o_h a uniformly drawn failed response of `uid`.
// Returns nullopt when the uid has no failed history. If the result would
// exceed the context limit, o_h is cut from its tail.
std::optional<std::vector<Token>> build_reflection_query(std::span<const Token> query, std::string_view uid,
                                                         const SampleBuffer& buffer, const ReflectionTemplate& tmpl,
                                                         RngStream& rng);

struct ReflectionBatch {
  std::vector<Query> queries;  // originals first, then one variant per hard query
  std::size_t activations = 0;
};

// Active only for epoch > 1. Originals are kept unchanged; each hard query
// with failed history adds one reflection variant (origin Reflection).
ReflectionBatch augment_batch(std::vector<Query> batch, int epoch, const SampleBuffer& buffer,
                              const ReflectionTemplate& tmpl, RngStream& rng);

}  // namespace r3
