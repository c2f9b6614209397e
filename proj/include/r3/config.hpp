#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "r3/optimizer.hpp"
#include "r3/reflection.hpp"
#include "r3/replay.hpp"
#include "r3/rewarding.hpp"
#include "r3/serr.hpp"
#include "r3/toy_env.hpp"

namespace r3 {

enum class Mode { R3, GRPO, DAPO };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

/// Every knob of a training run. Use default_config() rather than a bare
/// TrainConfig{}: it wires the cross-module defaults (L_max = T_max, guidance
/// tokens from the vocabulary layout).
struct TrainConfig {
  Mode mode = Mode::R3;
  std::size_t epochs = 12;
  std::size_t group_size = 8;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::size_t eval_rollouts = 32;

  toy::SuiteCounts suite;
  toy::EnvConfig env;
  toy::PriorShape prior;
  RewardSpec reward;
  serr::SerrParams serr;
  ReplayParams replay;
  ReflectionTemplate reflection;
  bool reflection_enabled = true;
  AdvantageParams advantage;
  ObjectiveParams objective;
  double learning_rate = 20.0;
  std::size_t buffer_capacity = 100000;

  // Throws ValidationError on the first violated constraint.
  void validate() const;
};

TrainConfig default_config();

// Keys: train.{mode,epochs,group_size,batch_size,seed,eval_rollouts},
// suite.{easy,medium,hard,extreme}, env.{vocab,context_order,t_max,max_prompt},
// reward.{correct,length_bonus,l_max,serr_rmax}, serr.{p,r_max},
// replay.{k,positivity_threshold}, reflection.{tau,window,guidance,enabled},
// opt.{alpha,lambda,epsilon,beta,lr,std_mode,kl_inside_min}, buffer.capacity,
// prior.{noise,reserved_penalty} and prior.<stratum>.{gold_length,gold_bonus,
// terminator_bias,trap_bonus,trap_gold_penalty,loop_bonus}.
// Unknown keys are rejected.
TrainConfig parse_config(std::string_view toml_text, std::string_view source = "config");
TrainConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const TrainConfig& config);

}  // namespace r3
