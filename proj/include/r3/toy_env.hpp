#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "r3/core.hpp"
#include "r3/policy.hpp"
#include "r3/rng.hpp"

namespace r3::toy {

enum class Difficulty { Easy, Medium, Hard, Extreme };
inline constexpr std::array<Difficulty, 4> kDifficulties = {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard,
                                                            Difficulty::Extreme};

std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view text);

struct Task {
  std::string uid;
  std::vector<Token> prompt;
  std::vector<Token> gold;
  Difficulty difficulty = Difficulty::Easy;
};

/// Vocabulary layout: token 0 is the terminator, [1, V-4) are answer tokens,
/// [V-4, V) are reserved for prompts and reflection guidance.
struct EnvConfig {
  std::size_t vocab_size = 16;
  std::size_t context_order = 2;
  std::size_t t_max = 32;               // generation limit
  std::size_t max_prompt_tokens = 64;   // context limit for reflection prompts

  void validate() const;
  Token first_reserved() const { return static_cast<Token>(vocab_size - 4); }
  std::size_t answer_token_count() const { return vocab_size - 5; }
  std::vector<Token> default_prompt() const;
  std::vector<Token> default_guidance() const;
};

struct SuiteCounts {
  std::size_t easy = 16;
  std::size_t medium = 16;
  std::size_t hard = 16;
  std::size_t extreme = 16;

  std::size_t total() const { return easy + medium + hard + extreme; }
  std::size_t of(Difficulty d) const;
};

// Initial-logit shape of one difficulty stratum.
struct StratumShape {
  std::size_t gold_length = 2;
  double gold_bonus = 0.0;       // added to the correct next token on the gold path
  double terminator_bias = 0.0;  // added to the terminator everywhere off the gold path
  double trap_bonus = 0.0;       // first-step distractor after the task prompt
  double trap_gold_penalty = 0.0;  // gap from the trap down to the first gold token
  double loop_bonus = 0.0;       // per-context dominant token (repetitive generation)
};

struct PriorShape {
  double noise_scale = 1.0;
  double reserved_penalty = -3.0;
  StratumShape easy{2, 3.0, 0.5, 0.0, 0.0, 0.0};
  StratumShape medium{3, 2.2, 0.5, 0.0, 0.0, 0.0};
  StratumShape hard{3, 3.0, -1.0, 5.0, 5.0, 2.0};
  StratumShape extreme{0, 0.0, -30.0, 0.0, 0.0, 3.0};

  const StratumShape& of(Difficulty d) const;
  StratumShape& of(Difficulty d);
};

/// Deterministic task suite. uids are "q0", "q1", ... in stratum order
/// Easy, Medium, Hard, Extreme. Extreme gold answers need t_max answer tokens
/// plus the terminator, so they can never be produced.
std::vector<Task> make_suite(std::uint64_t seed, const SuiteCounts& counts, const EnvConfig& env,
                             const PriorShape& shape = {});

/// Initial logits for a suite: seeded per-context noise, a bonus along each
/// task's gold path, a first-step trap on Hard tasks, and a suppressed
/// terminator with a dominant loop token on Extreme tasks. The gold path is
/// recognized after both the task prompt and the reflection guidance; only the
/// prompt entry carries the trap.
class SuitePrior final : public LogitPrior {
 public:
  SuitePrior(std::span<const Task> tasks, const EnvConfig& env, std::span<const Token> guidance, std::uint64_t seed,
             PriorShape shape = {});

  void initial_logits(const ContextKey& key, std::span<double> out) const override;

 private:
  struct TaskPrior {
    Difficulty difficulty;
    std::uint64_t salt;
    std::map<std::vector<Token>, Token> gold_next;  // window -> next gold token
    std::vector<Token> trap_window;
    Token trap_token = 0;
    Token first_gold = 0;
  };

  EnvConfig env_;
  PriorShape shape_;
  std::uint64_t seed_;
  std::map<std::string, TaskPrior, std::less<>> tasks_;
};

TabularPolicy make_initial_policy(std::span<const Task> tasks, const EnvConfig& env, std::span<const Token> guidance,
                                  std::uint64_t seed, const PriorShape& shape = {});

/// Samples one response autoregressively until the terminator or t_max tokens.
/// The returned record carries behavior log-probabilities and exact step
/// entropies; its reward is left at 0.
SampleRecord rollout(const Policy& policy, std::string_view uid, std::span<const Token> prompt, std::size_t t_max,
                     RngStream& rng);

// Fraction of n rollouts from the task prompt that verify.
double estimate_solve_rate(const Policy& policy, const Task& task, std::size_t t_max, std::size_t n, RngStream& rng);

nlohmann::json to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);
void write_suite_jsonl(std::span<const Task> tasks, std::ostream& out);
std::vector<Task> read_suite_jsonl(std::istream& in);

}  // namespace r3::toy
