#include "r3/toy_env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <utility>

#include "r3/rewarding.hpp"
#include "r3/serr.hpp"

namespace r3::toy {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy:
      return "easy";
    case Difficulty::Medium:
      return "medium";
    case Difficulty::Hard:
      return "hard";
    case Difficulty::Extreme:
      return "extreme";
  }
  return "easy";
}

Difficulty difficulty_from_string(std::string_view text) {
  for (auto d : kDifficulties) {
    if (to_string(d) == text) return d;
  }
  throw ValidationError("unknown difficulty '" + std::string(text) + "'");
}

void EnvConfig::validate() const {
  if (vocab_size < 8) throw ValidationError("env.vocab must be at least 8");
  if (context_order < 1) throw ValidationError("env.context_order must be at least 1");
  if (t_max < 1) throw ValidationError("env.t_max must be at least 1");
  if (max_prompt_tokens < 2 * context_order + 2) throw ValidationError("env.max_prompt_tokens is too small");
}

std::vector<Token> EnvConfig::default_prompt() const {
  const Token r = first_reserved();
  std::vector<Token> prompt;
  for (std::size_t i = 0; i < context_order; ++i) prompt.push_back(static_cast<Token>(r + static_cast<Token>(i % 2)));
  return prompt;
}

std::vector<Token> EnvConfig::default_guidance() const {
  const Token r = first_reserved();
  std::vector<Token> guidance;
  for (std::size_t i = 0; i < context_order; ++i) {
    guidance.push_back(static_cast<Token>(r + 2 + static_cast<Token>(i % 2)));
  }
  return guidance;
}

std::size_t SuiteCounts::of(Difficulty d) const {
  switch (d) {
    case Difficulty::Easy:
      return easy;
    case Difficulty::Medium:
      return medium;
    case Difficulty::Hard:
      return hard;
    case Difficulty::Extreme:
      return extreme;
  }
  return 0;
}

const StratumShape& PriorShape::of(Difficulty d) const {
  switch (d) {
    case Difficulty::Easy:
      return easy;
    case Difficulty::Medium:
      return medium;
    case Difficulty::Hard:
      return hard;
    case Difficulty::Extreme:
      return extreme;
  }
  return easy;
}

StratumShape& PriorShape::of(Difficulty d) {
  return const_cast<StratumShape&>(std::as_const(*this).of(d));
}

namespace {

Token answer_token(RngStream& rng, const EnvConfig& env) {
  return static_cast<Token>(1 + rng.index(env.answer_token_count()));
}

std::uint64_t hash_window(std::uint64_t salt, std::span<const Token> window) {
  std::uint64_t h = mix64(salt);
  for (Token t : window) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(t) + 7));
  return h;
}

double unit_from_bits(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

// Standard normal draw keyed by (h, v).
double keyed_normal(std::uint64_t h, std::size_t v) {
  const std::uint64_t a = mix64(h ^ mix64(2 * v + 1));
  const std::uint64_t b = mix64(a ^ 0xd1b54a32d192ed03ULL);
  const double u1 = unit_from_bits(a);
  const double u2 = unit_from_bits(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<Token> window_of(std::span<const Token> sequence, std::size_t order) {
  std::vector<Token> window(order, kPadToken);
  const std::size_t take = std::min(order, sequence.size());
  std::copy(sequence.end() - static_cast<std::ptrdiff_t>(take), sequence.end(),
            window.end() - static_cast<std::ptrdiff_t>(take));
  return window;
}

}  // namespace

std::vector<Task> make_suite(std::uint64_t seed, const SuiteCounts& counts, const EnvConfig& env,
                             const PriorShape& shape) {
  env.validate();
  std::vector<Task> tasks;
  tasks.reserve(counts.total());
  std::size_t index = 0;
  for (auto d : kDifficulties) {
    const auto& stratum = shape.of(d);
    const std::size_t length = d == Difficulty::Extreme ? env.t_max : stratum.gold_length;
    if (length == 0) throw ValidationError("gold answers must be non-empty");
    for (std::size_t i = 0; i < counts.of(d); ++i, ++index) {
      RngStream rng(seed, "suite", {index});
      Task task;
      task.uid = "q" + std::to_string(index);
      task.prompt = env.default_prompt();
      task.difficulty = d;
      // Adjacent gold tokens differ so every gold-path window is distinct.
      while (task.gold.size() < length) {
        const Token t = answer_token(rng, env);
        if (!task.gold.empty() && task.gold.back() == t) continue;
        task.gold.push_back(t);
      }
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

SuitePrior::SuitePrior(std::span<const Task> tasks, const EnvConfig& env, std::span<const Token> guidance,
                       std::uint64_t seed, PriorShape shape)
    : env_(env), shape_(shape), seed_(seed) {
  env_.validate();
  for (const auto& task : tasks) {
    TaskPrior prior;
    prior.difficulty = task.difficulty;
    prior.salt = mix64(seed ^ mix64(stable_hash(task.uid)));
    if (task.difficulty != Difficulty::Extreme) {
      for (const auto& entry : {std::vector<Token>(task.prompt), std::vector<Token>(guidance.begin(), guidance.end())}) {
        std::vector<Token> sequence = entry;
        for (std::size_t t = 0; t <= task.gold.size(); ++t) {
          const Token next = t < task.gold.size() ? task.gold[t] : kTerminator;
          prior.gold_next.emplace(window_of(sequence, env_.context_order), next);
          if (t < task.gold.size()) sequence.push_back(task.gold[t]);
        }
      }
    }
    prior.first_gold = task.gold.front();
    prior.trap_window = window_of(task.prompt, env_.context_order);
    RngStream rng(seed, "trap", {stable_hash(task.uid)});
    do {
      prior.trap_token = answer_token(rng, env_);
    } while (prior.trap_token == prior.first_gold);
    tasks_.emplace(task.uid, std::move(prior));
  }
}

void SuitePrior::initial_logits(const ContextKey& key, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  auto it = tasks_.find(key.cls);
  if (it == tasks_.end()) return;
  const auto& task = it->second;
  const auto& stratum = shape_.of(task.difficulty);

  const std::uint64_t h = hash_window(task.salt, key.window);
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = shape_.noise_scale * keyed_normal(h, v);
  for (auto v = static_cast<std::size_t>(env_.first_reserved()); v < out.size(); ++v) out[v] += shape_.reserved_penalty;
  if (auto g = task.gold_next.find(key.window); g != task.gold_next.end()) {
    out[static_cast<std::size_t>(g->second)] += stratum.gold_bonus;
  } else {
    out[kTerminator] += stratum.terminator_bias;
    if (stratum.loop_bonus != 0.0) {
      const auto loop = 1 + mix64(h ^ 0x4c6f6f70ULL) % env_.answer_token_count();
      out[loop] += stratum.loop_bonus;
    }
  }
  if (stratum.trap_bonus != 0.0 && key.window == task.trap_window) {
    // The first gold token sits a fixed gap below the trap, so no noise draw
    // can make the task easy.
    const auto trap = static_cast<std::size_t>(task.trap_token);
    out[trap] += stratum.trap_bonus;
    out[static_cast<std::size_t>(task.first_gold)] = out[trap] - stratum.trap_gold_penalty;
  }
}

TabularPolicy make_initial_policy(std::span<const Task> tasks, const EnvConfig& env, std::span<const Token> guidance,
                                  std::uint64_t seed, const PriorShape& shape) {
  return TabularPolicy(env.vocab_size, env.context_order,
                       std::make_shared<SuitePrior>(tasks, env, guidance, seed, shape));
}

SampleRecord rollout(const Policy& policy, std::string_view uid, std::span<const Token> prompt, std::size_t t_max,
                     RngStream& rng) {
  if (t_max < 1) throw ValidationError("rollout needs t_max >= 1");
  SampleRecord record;
  record.uid = std::string(uid);
  std::vector<Token> sequence(prompt.begin(), prompt.end());
  std::vector<double> probs(policy.vocab_size());

  for (std::size_t t = 0; t < t_max; ++t) {
    policy.distribution(uid, sequence, probs);
    const double u = rng.uniform();
    std::size_t chosen = probs.size();
    double cdf = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
      cdf += probs[v];
      if (u < cdf && probs[v] > 0.0) {
        chosen = v;
        break;
      }
    }
    if (chosen == probs.size()) {
      // u fell past the rounded cdf; take the last token with mass
      for (std::size_t v = probs.size(); v-- > 0;) {
        if (probs[v] > 0.0) {
          chosen = v;
          break;
        }
      }
    }
    const auto token = static_cast<Token>(chosen);
    record.response.push_back(token);
    record.behavior_logprobs.push_back(std::log(probs[chosen]));
    record.token_entropies.push_back(serr::token_entropy(probs));
    sequence.push_back(token);
    if (token == kTerminator) break;
  }
  record.truncated = record.response.back() != kTerminator;
  return record;
}

double estimate_solve_rate(const Policy& policy, const Task& task, std::size_t t_max, std::size_t n, RngStream& rng) {
  if (n == 0) return 0.0;
  std::size_t solved = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto record = rollout(policy, task.uid, task.prompt, t_max, rng);
    if (verify(record.response, task.gold)) ++solved;
  }
  return static_cast<double>(solved) / static_cast<double>(n);
}

nlohmann::json to_json(const Task& task) {
  return {{"uid", task.uid}, {"prompt", task.prompt}, {"gold", task.gold}, {"difficulty", to_string(task.difficulty)}};
}

Task task_from_json(const nlohmann::json& j) {
  Task task;
  j.at("uid").get_to(task.uid);
  j.at("prompt").get_to(task.prompt);
  j.at("gold").get_to(task.gold);
  task.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
  if (task.gold.empty()) throw ValidationError("task '" + task.uid + "' has an empty gold answer");
  return task;
}

void write_suite_jsonl(std::span<const Task> tasks, std::ostream& out) {
  for (const auto& task : tasks) out << to_json(task).dump() << '\n';
}

std::vector<Task> read_suite_jsonl(std::istream& in) {
  std::vector<Task> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tasks.push_back(task_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tasks;
}

}  // namespace r3::toy
