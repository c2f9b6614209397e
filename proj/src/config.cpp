#include "r3/config.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

namespace r3 {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::R3:
      return "r3";
    case Mode::GRPO:
      return "grpo";
    case Mode::DAPO:
      return "dapo";
  }
  return "r3";
}

Mode mode_from_string(std::string_view text) {
  if (text == "r3" || text == "R3") return Mode::R3;
  if (text == "grpo" || text == "GRPO") return Mode::GRPO;
  if (text == "dapo" || text == "DAPO") return Mode::DAPO;
  throw ValidationError("unknown mode '" + std::string(text) + "'");
}

TrainConfig default_config() {
  TrainConfig config;
  config.reward.length_max = config.env.t_max;
  config.reward.serr_rmax = config.serr.r_max;
  config.reflection.guidance = config.env.default_guidance();
  config.reflection.max_prompt_tokens = config.env.max_prompt_tokens;
  config.reflection.positivity_threshold = config.replay.positivity_threshold;
  return config;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train.epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("train.batch_size must be at least 1");
  if (group_size < 1 || (mode != Mode::DAPO && group_size < 2)) {
    throw ValidationError("train.group_size must be at least 2");
  }
  if (suite.total() == 0) throw ValidationError("suite must contain at least one task");
  env.validate();
  reward.validate();
  serr.validate();
  if (serr.r_max != reward.serr_rmax) throw ValidationError("serr.r_max and reward.serr_rmax disagree");
  replay.validate();
  reflection.validate(reward.correct_reward);
  advantage.validate();
  objective.validate();
  if (advantage.lambda == 0.0) {
    // every mode sees tied groups (AllPositive with equal lengths, starved replays)
    throw ValidationError("opt.lambda must be positive: tied groups occur in every mode");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("opt.lr must be positive");
  if (buffer_capacity < 1) throw ValidationError("buffer.capacity must be at least 1");
  for (Token t : reflection.guidance) {
    if (t < 0 || static_cast<std::size_t>(t) >= env.vocab_size) {
      throw ValidationError("reflection.guidance token outside the vocabulary");
    }
  }
}

namespace {

class TableReader {
 public:
  TableReader(const toml::table& root, std::string_view source) : root_(root), source_(source) {}

  const toml::table* table(std::string_view name) {
    const auto* node = root_.get(name);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) fail(std::string(name) + " must be a table");
    known_tables_.insert(std::string(name));
    return t;
  }

  // Nested table `parent.name`.
  const toml::table* table(const toml::table* parent, std::string_view parent_name, std::string_view name) {
    const std::string full = std::string(parent_name) + "." + std::string(name);
    if (!parent) return nullptr;
    const auto* node = parent->get(name);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) fail(full + " must be a table");
    known_tables_.insert(full);
    return t;
  }

  template <typename T>
  std::optional<T> get(const toml::table* t, std::string_view table_name, std::string_view key) {
    seen_.insert(std::string(table_name) + "." + std::string(key));
    if (!t) return std::nullopt;
    const auto* node = t->get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->as_boolean()) return v->get();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->as_string()) return v->get();
    } else {
      if (auto v = node->as_integer()) {
        if (v->get() < 0) fail(std::string(table_name) + "." + std::string(key) + " must be non-negative");
        return static_cast<T>(v->get());
      }
    }
    fail(std::string(table_name) + "." + std::string(key) + " has the wrong type");
  }

  std::optional<std::vector<Token>> tokens(const toml::table* t, std::string_view table_name, std::string_view key) {
    seen_.insert(std::string(table_name) + "." + std::string(key));
    if (!t) return std::nullopt;
    const auto* node = t->get(key);
    if (!node) return std::nullopt;
    const auto* arr = node->as_array();
    if (!arr) fail(std::string(table_name) + "." + std::string(key) + " must be an array of integers");
    std::vector<Token> out;
    for (const auto& item : *arr) {
      auto v = item.value<std::int64_t>();
      if (!v) fail(std::string(table_name) + "." + std::string(key) + " must be an array of integers");
      out.push_back(static_cast<Token>(*v));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [name, node] : root_) {
      const std::string table_name(name.str());
      if (!known_tables_.contains(table_name)) fail("unknown table or key '" + table_name + "'");
      reject_unknown(*node.as_table(), table_name);
    }
  }

  void reject_unknown(const toml::table& t, const std::string& prefix) const {
    for (const auto& [key, value] : t) {
      const std::string full = prefix + "." + std::string(key.str());
      if (value.is_table() && known_tables_.contains(full)) {
        reject_unknown(*value.as_table(), full);
      } else if (!seen_.contains(full)) {
        fail("unknown key '" + full + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ValidationError(std::string(source_) + ": " + message);
  }

 private:
  const toml::table& root_;
  std::string source_;
  std::set<std::string> known_tables_;
  std::set<std::string> seen_;
};

template <typename T>
void assign(T& target, const std::optional<T>& value) {
  if (value) target = *value;
}

void read_stratum(TableReader& r, const toml::table* prior, std::string_view name, toy::StratumShape& s) {
  const auto* t = r.table(prior, "prior", name);
  const std::string full = "prior." + std::string(name);
  assign(s.gold_length, r.get<std::size_t>(t, full, "gold_length"));
  assign(s.gold_bonus, r.get<double>(t, full, "gold_bonus"));
  assign(s.terminator_bias, r.get<double>(t, full, "terminator_bias"));
  assign(s.trap_bonus, r.get<double>(t, full, "trap_bonus"));
  assign(s.trap_gold_penalty, r.get<double>(t, full, "trap_gold_penalty"));
  assign(s.loop_bonus, r.get<double>(t, full, "loop_bonus"));
}

}  // namespace

TrainConfig parse_config(std::string_view toml_text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ValidationError(msg.str());
  }

  TrainConfig c = default_config();
  TableReader r(root, source);

  const auto* train = r.table("train");
  if (auto mode = r.get<std::string>(train, "train", "mode")) c.mode = mode_from_string(*mode);
  assign(c.epochs, r.get<std::size_t>(train, "train", "epochs"));
  assign(c.group_size, r.get<std::size_t>(train, "train", "group_size"));
  assign(c.batch_size, r.get<std::size_t>(train, "train", "batch_size"));
  assign(c.seed, r.get<std::uint64_t>(train, "train", "seed"));
  assign(c.eval_rollouts, r.get<std::size_t>(train, "train", "eval_rollouts"));

  const auto* suite = r.table("suite");
  assign(c.suite.easy, r.get<std::size_t>(suite, "suite", "easy"));
  assign(c.suite.medium, r.get<std::size_t>(suite, "suite", "medium"));
  assign(c.suite.hard, r.get<std::size_t>(suite, "suite", "hard"));
  assign(c.suite.extreme, r.get<std::size_t>(suite, "suite", "extreme"));

  const auto* env = r.table("env");
  assign(c.env.vocab_size, r.get<std::size_t>(env, "env", "vocab"));
  assign(c.env.context_order, r.get<std::size_t>(env, "env", "context_order"));
  assign(c.env.t_max, r.get<std::size_t>(env, "env", "t_max"));
  assign(c.env.max_prompt_tokens, r.get<std::size_t>(env, "env", "max_prompt"));

  const auto* prior = r.table("prior");
  assign(c.prior.noise_scale, r.get<double>(prior, "prior", "noise"));
  assign(c.prior.reserved_penalty, r.get<double>(prior, "prior", "reserved_penalty"));
  for (auto d : toy::kDifficulties) {
    read_stratum(r, prior, toy::to_string(d), c.prior.of(d));
  }

  const auto* reward = r.table("reward");
  assign(c.reward.correct_reward, r.get<double>(reward, "reward", "correct"));
  assign(c.reward.length_bonus_enabled, r.get<bool>(reward, "reward", "length_bonus"));
  c.reward.length_max = r.get<std::size_t>(reward, "reward", "l_max").value_or(c.env.t_max);
  const auto reward_rmax = r.get<double>(reward, "reward", "serr_rmax");

  const auto* serr = r.table("serr");
  assign(c.serr.p, r.get<double>(serr, "serr", "p"));
  const auto serr_rmax = r.get<double>(serr, "serr", "r_max");
  if (reward_rmax && serr_rmax && *reward_rmax != *serr_rmax) {
    r.fail("reward.serr_rmax and serr.r_max disagree");
  }
  if (auto rmax = reward_rmax ? reward_rmax : serr_rmax) c.serr.r_max = *rmax;
  c.reward.serr_rmax = c.serr.r_max;

  const auto* replay = r.table("replay");
  assign(c.replay.k, r.get<std::size_t>(replay, "replay", "k"));
  assign(c.replay.positivity_threshold, r.get<double>(replay, "replay", "positivity_threshold"));

  const auto* reflection = r.table("reflection");
  assign(c.reflection.tau, r.get<double>(reflection, "reflection", "tau"));
  assign(c.reflection.history_window, r.get<std::size_t>(reflection, "reflection", "window"));
  c.reflection.guidance = r.tokens(reflection, "reflection", "guidance").value_or(c.env.default_guidance());
  assign(c.reflection_enabled, r.get<bool>(reflection, "reflection", "enabled"));
  c.reflection.max_prompt_tokens = c.env.max_prompt_tokens;
  c.reflection.positivity_threshold = c.replay.positivity_threshold;

  const auto* opt = r.table("opt");
  assign(c.advantage.alpha, r.get<double>(opt, "opt", "alpha"));
  assign(c.advantage.lambda, r.get<double>(opt, "opt", "lambda"));
  if (auto mode = r.get<std::string>(opt, "opt", "std_mode")) c.advantage.std_mode = std_mode_from_string(*mode);
  assign(c.objective.epsilon, r.get<double>(opt, "opt", "epsilon"));
  assign(c.objective.beta, r.get<double>(opt, "opt", "beta"));
  assign(c.objective.kl_inside_min, r.get<bool>(opt, "opt", "kl_inside_min"));
  assign(c.learning_rate, r.get<double>(opt, "opt", "lr"));

  const auto* buffer = r.table("buffer");
  assign(c.buffer_capacity, r.get<std::size_t>(buffer, "buffer", "capacity"));

  r.reject_unknown();
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

namespace {

nlohmann::json prior_json(const toy::PriorShape& p) {
  nlohmann::json j = {{"noise", p.noise_scale}, {"reserved_penalty", p.reserved_penalty}};
  for (auto d : toy::kDifficulties) {
    const auto& s = p.of(d);
    j[std::string(toy::to_string(d))] = {{"gold_length", s.gold_length},      {"gold_bonus", s.gold_bonus},
                                         {"terminator_bias", s.terminator_bias}, {"trap_bonus", s.trap_bonus},
                                         {"trap_gold_penalty", s.trap_gold_penalty}, {"loop_bonus", s.loop_bonus}};
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"train",
       {{"mode", to_string(c.mode)},
        {"epochs", c.epochs},
        {"group_size", c.group_size},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"eval_rollouts", c.eval_rollouts}}},
      {"suite", {{"easy", c.suite.easy}, {"medium", c.suite.medium}, {"hard", c.suite.hard}, {"extreme", c.suite.extreme}}},
      {"env",
       {{"vocab", c.env.vocab_size},
        {"context_order", c.env.context_order},
        {"t_max", c.env.t_max},
        {"max_prompt", c.env.max_prompt_tokens}}},
      {"prior", prior_json(c.prior)},
      {"reward",
       {{"correct", c.reward.correct_reward},
        {"length_bonus", c.reward.length_bonus_enabled},
        {"l_max", c.reward.length_max},
        {"serr_rmax", c.reward.serr_rmax}}},
      {"serr", {{"p", c.serr.p}, {"r_max", c.serr.r_max}}},
      {"replay", {{"k", c.replay.k}, {"positivity_threshold", c.replay.positivity_threshold}}},
      {"reflection",
       {{"tau", c.reflection.tau},
        {"window", c.reflection.history_window},
        {"guidance", c.reflection.guidance},
        {"enabled", c.reflection_enabled}}},
      {"opt",
       {{"alpha", c.advantage.alpha},
        {"lambda", c.advantage.lambda},
        {"std_mode", to_string(c.advantage.std_mode)},
        {"epsilon", c.objective.epsilon},
        {"beta", c.objective.beta},
        {"kl_inside_min", c.objective.kl_inside_min},
        {"lr", c.learning_rate}}},
      {"buffer", {{"capacity", c.buffer_capacity}}},
  };
}

}  // namespace r3
