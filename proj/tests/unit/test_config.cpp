#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "r3/config.hpp"

using namespace r3;

namespace {

std::string error_of(std::string_view text) {
  try {
    (void)parse_config(text, "cfg.toml");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults are valid and wired across modules") {
  const auto c = default_config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.reward.length_max == c.env.t_max);
  CHECK(c.reflection.guidance == c.env.default_guidance());
  CHECK(c.serr.r_max == c.reward.serr_rmax);
  CHECK(c.epochs == 12);
  CHECK(c.group_size == 8);
  CHECK(c.batch_size == 16);
  CHECK(c.suite.total() == 64);
  CHECK(c.replay.k == 2);
  CHECK(c.reflection.tau == 0.25);
  CHECK(c.advantage.alpha == 1.5);
  CHECK(c.advantage.lambda == 1e-4);
}

TEST_CASE("empty text gives the defaults") {
  CHECK(to_json(parse_config("")) == to_json(default_config()));
}

TEST_CASE("keys override defaults") {
  const auto c = parse_config(R"(
[train]
mode = "grpo"
epochs = 3
seed = 42
[env]
t_max = 20
[serr]
p = 0.3
r_max = 0.4
[replay]
k = 4
[reflection]
tau = 0.1
guidance = [14]
[opt]
alpha = 2.0
std_mode = "sample"
kl_inside_min = true
lr = 0.5
[prior.hard]
trap_bonus = 1.0
)");
  CHECK(c.mode == Mode::GRPO);
  CHECK(c.epochs == 3);
  CHECK(c.seed == 42);
  CHECK(c.env.t_max == 20);
  CHECK(c.reward.length_max == 20);
  CHECK(c.serr.p == 0.3);
  CHECK(c.reward.serr_rmax == 0.4);
  CHECK(c.replay.k == 4);
  CHECK(c.reflection.tau == 0.1);
  CHECK(c.reflection.guidance == std::vector<Token>{14});
  CHECK(c.advantage.alpha == 2.0);
  CHECK(c.advantage.std_mode == StdMode::Sample);
  CHECK(c.objective.kl_inside_min);
  CHECK(c.learning_rate == 0.5);
  CHECK(c.prior.hard.trap_bonus == 1.0);
  CHECK(c.prior.hard.gold_bonus == default_config().prior.hard.gold_bonus);
}

TEST_CASE("either entropy-ranking maximum key sets both") {
  CHECK(parse_config("[reward]\nserr_rmax = 0.3\n").serr.r_max == 0.3);
  CHECK(parse_config("[serr]\nr_max = 0.3\n").reward.serr_rmax == 0.3);
}

TEST_CASE("configuration errors name the problem") {
  CHECK(error_of("[train]\nepochz = 3\n").find("train.epochz") != std::string::npos);
  CHECK(error_of("[nope]\nx = 1\n").find("nope") != std::string::npos);
  CHECK(error_of("[prior.hard]\nwat = 1\n").find("prior.hard.wat") != std::string::npos);
  CHECK(error_of("[reward]\nserr_rmax = 0.5\n[serr]\nr_max = 0.4\n").find("disagree") != std::string::npos);
  CHECK(error_of("[opt]\nlambda = 0.0\n").find("opt.lambda") != std::string::npos);
  CHECK(error_of("[train]\nepochs = \"many\"\n").find("train.epochs") != std::string::npos);
  CHECK(error_of("[train]\nmode = \"ppo\"\n").find("ppo") != std::string::npos);
  CHECK(error_of("[train\n").find("cfg.toml") != std::string::npos);
  CHECK_FALSE(error_of("[serr]\nr_max = 1.0\n").empty());
  CHECK_FALSE(error_of("[train]\ngroup_size = 1\n").empty());
  CHECK_FALSE(error_of("[train]\nepochs = 0\n").empty());
  CHECK_FALSE(error_of("[opt]\nepsilon = 1.5\n").empty());
  CHECK_FALSE(error_of("[reflection]\nguidance = [99]\n").empty());
  CHECK_FALSE(error_of("[reflection]\ntau = 1.0\n").empty());
  CHECK_FALSE(error_of("[train]\nepochs = -2\n").empty());
}

TEST_CASE("DAPO accepts single-rollout groups") {
  CHECK(parse_config("[train]\nmode = \"dapo\"\ngroup_size = 1\n").group_size == 1);
}

TEST_CASE("load_config reads files and reports missing ones") {
  const auto path = std::filesystem::temp_directory_path() / "r3_config_test.toml";
  std::ofstream(path) << "[train]\nepochs = 2\n";
  CHECK(load_config(path).epochs == 2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config(path), IoError);
}

TEST_CASE("mode names") {
  for (auto m : {Mode::R3, Mode::GRPO, Mode::DAPO}) CHECK(mode_from_string(to_string(m)) == m);
}
