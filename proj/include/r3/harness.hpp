#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r3/buffer.hpp"
#include "r3/config.hpp"
#include "r3/optimizer.hpp"
#include "r3/policy.hpp"
#include "r3/replay.hpp"
#include "r3/toy_env.hpp"

namespace r3 {

/// Per-optimization-step training statistics. Solve fractions describe the
/// on-policy groups of the original queries, before any replay injection.
struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double mean_reward = 0.0;          // outcome reward over every on-policy rollout
  double solve_all_frac = 0.0;
  double solve_none_frac = 0.0;
  double mean_policy_entropy = 0.0;  // over every on-policy rollout token
  std::size_t replay_injections = 0;
  std::size_t reflection_activations = 0;
  std::size_t serr_groups = 0;
  std::size_t starved_groups = 0;
  std::size_t dropped_groups = 0;
  double gradient_norm = 0.0;
};

nlohmann::json to_json(const StepMetrics& m);
void write_metrics_jsonl(std::span<const StepMetrics> metrics, std::ostream& out);

struct PreparedGroup {
  Group group;
  AdvantageBatch advantages;
  bool dropped = false;
  bool serr_applied = false;
  std::size_t injected = 0;
};

/// Mode-specific group handling:
///  R3   - AllNegative: entropy-ranking rewards on the on-policy members, then
///         replay of positive history; AllPositive: replay of negative history.
///         The alpha damping applies only when off-policy members were added.
///  GRPO - group-normalized advantages with lambda, nothing else.
///  DAPO - AllPositive and AllNegative groups are dropped.
PreparedGroup prepare_group(Group group, const TrainConfig& config, const SampleBuffer& buffer, RngStream& rng);

ObjectiveGroup objective_group(const PreparedGroup& prepared);

using StratumRates = std::array<double, 4>;  // indexed by toy::Difficulty

struct TrainResult {
  std::vector<toy::Task> suite;
  TabularPolicy policy;
  SampleBuffer buffer;
  std::vector<StepMetrics> metrics;
  StratumRates final_solve_rate{};  // solve rate from the task prompts after training
};

// Tasks in batch order: strata interleaved so each batch mixes difficulties.
std::vector<std::size_t> batch_order(std::span<const toy::Task> suite);

TrainResult train(const TrainConfig& config);

StratumRates evaluate(const Policy& policy, std::span<const toy::Task> suite, const TrainConfig& config);

struct CompareRun {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<StepMetrics> metrics;
  StratumRates final_solve_rate{};
};

struct CompareResult {
  std::vector<std::string> labels;
  std::vector<CompareRun> runs;

  std::vector<const CompareRun*> runs_for(std::string_view label) const;
};

/// Runs every (config, seed) pair; the config's own seed is replaced.
CompareResult compare(std::span<const TrainConfig> configs, std::span<const std::uint64_t> seeds);

// Per-step median across the runs of one label. Steps beyond the shortest run
// are dropped.
std::vector<double> median_trajectory(const CompareResult& result, std::string_view label,
                                      double StepMetrics::*field);
double median_final_solve_rate(const CompareResult& result, std::string_view label, toy::Difficulty d);
double median(std::vector<double> values);

// Header: step,mode,seed,mean_reward,solve_all,solve_none,entropy,replay_injections,reflection_activations
// One row per run and step, then one row per label and step with seed "median".
void write_compare_csv(const CompareResult& result, std::ostream& out);
// Header: mode,seed,easy,medium,hard,extreme
void write_strata_csv(const CompareResult& result, std::ostream& out);

/// Human-readable dump of a buffer file. Throws IoError naming the line of the
/// first corrupt record.
void inspect_buffer(const std::filesystem::path& path, const std::optional<std::string>& uid, double p,
                    std::ostream& out);

/// Reads one entropy trace per line (a JSON array, or an object with a
/// "token_entropies" array), ranks them as one group and writes "score,reward"
/// CSV rows in input order.
void score_traces(std::istream& in, double p, double r_max, std::ostream& out);

}  // namespace r3
