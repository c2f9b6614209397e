#include "r3/reflection.hpp"

#include <algorithm>

namespace r3 {

void ReflectionTemplate::validate(double correct_reward) const {
  if (guidance.empty()) throw ValidationError("reflection.guidance must be non-empty");
  if (history_window < 1) throw ValidationError("reflection.window must be at least 1");
  if (!(tau >= 0.0 && tau < correct_reward)) throw ValidationError("reflection.tau must lie in [0, reward.correct)");
}

bool is_hard(std::string_view uid, const SampleBuffer& buffer, const ReflectionTemplate& tmpl) {
  const auto mean = buffer.history_mean_reward(uid, tmpl.history_window);
  return mean.has_value() && *mean < tmpl.tau;
}

std::optional<std::vector<Token>> build_reflection_query(std::span<const Token> query, std::string_view uid,
                                                         const SampleBuffer& buffer, const ReflectionTemplate& tmpl,
                                                         RngStream& rng) {
  if (tmpl.guidance.empty()) throw ValidationError("reflection guidance must be non-empty");
  auto failures = buffer.retrieve(uid, reward_below(tmpl.positivity_threshold), 1, rng);
  if (failures.empty()) return std::nullopt;
  const auto& past = failures.front().response;

  std::size_t keep = past.size();
  if (tmpl.max_prompt_tokens > 0) {
    const std::size_t fixed = query.size() + tmpl.guidance.size();
    keep = tmpl.max_prompt_tokens > fixed ? std::min(keep, tmpl.max_prompt_tokens - fixed) : 0;
  }
  std::vector<Token> out(query.begin(), query.end());
  out.insert(out.end(), past.begin(), past.begin() + static_cast<std::ptrdiff_t>(keep));
  out.insert(out.end(), tmpl.guidance.begin(), tmpl.guidance.end());
  return out;
}

ReflectionBatch augment_batch(std::vector<Query> batch, int epoch, const SampleBuffer& buffer,
                              const ReflectionTemplate& tmpl, RngStream& rng) {
  ReflectionBatch out;
  out.queries = std::move(batch);
  if (epoch <= 1) return out;

  const std::size_t originals = out.queries.size();
  for (std::size_t i = 0; i < originals; ++i) {
    const auto& q = out.queries[i];
    if (q.origin != Origin::OnPolicy || !is_hard(q.uid, buffer, tmpl)) continue;
    auto prompt = build_reflection_query(q.prompt, q.uid, buffer, tmpl, rng);
    if (!prompt) continue;
    out.queries.push_back(Query{q.uid, std::move(*prompt), Origin::Reflection});
    ++out.activations;
  }
  return out;
}

}  // namespace r3
