#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "r3/harness.hpp"

using namespace r3;
using r3::testing::make_record;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config(Mode mode) {
  auto c = default_config();
  c.mode = mode;
  c.suite = toy::SuiteCounts{3, 3, 3, 3};
  c.epochs = 4;
  c.group_size = 4;
  c.batch_size = 5;
  c.eval_rollouts = 4;
  c.seed = 3;
  return c;
}

Group negative_group(std::size_t n) {
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = make_record("q1", 0.0, 3 + i);
    r.token_entropies[i % r.length()] += 0.5;  // distinct entropy structure per member
    records.push_back(r);
  }
  return make_group("q1", {12, 13}, records, 1.0);
}

LogitGradient gradient_of(const PreparedGroup& p, const TrainConfig& c) {
  const TabularPolicy policy(16, 2);
  return objective_gradient(policy, objective_group(p), policy, c.objective);
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto path = fs::temp_directory_path() / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

}  // namespace

TEST_CASE("an all-negative group: collapse under GRPO, signal under R3") {
  SampleBuffer buffer;
  buffer.insert(make_record("q1", 1.5));
  const auto grpo = small_config(Mode::GRPO);
  const auto r3 = small_config(Mode::R3);
  RngStream a(1, "g"), b(1, "g");

  const auto collapsed = prepare_group(negative_group(4), grpo, buffer, a);
  for (double x : collapsed.advantages.advantages) CHECK(x == 0.0);
  CHECK(gradient_norm(gradient_of(collapsed, grpo)) == 0.0);
  CHECK_FALSE(collapsed.serr_applied);
  CHECK(collapsed.injected == 0);

  const auto rescued = prepare_group(negative_group(4), r3, buffer, b);
  CHECK(rescued.serr_applied);
  CHECK(rescued.injected == 1);
  CHECK(rescued.group.members.size() == 5);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rescued.group.members[i].record.reward >= 0.0);
    CHECK(rescued.group.members[i].record.reward <= r3.serr.r_max);
  }
  CHECK(gradient_norm(gradient_of(rescued, r3)) > 0.0);
}

TEST_CASE("alpha damping applies only when samples were injected") {
  const SampleBuffer empty;
  const auto c = small_config(Mode::R3);
  RngStream rng(1, "g");
  const auto p = prepare_group(negative_group(4), c, empty, rng);
  CHECK(p.group.starved);
  const auto plain = group_advantages(p.group.rewards(), AdvantageParams{1.0, c.advantage.lambda, c.advantage.std_mode});
  CHECK(p.advantages.advantages == plain.advantages);
}

TEST_CASE("property: DAPO never trains on a zero-variance group") {
  std::mt19937_64 gen(81);
  const auto c = small_config(Mode::DAPO);
  SampleBuffer buffer;
  buffer.insert(make_record("q1", 1.5));
  buffer.insert(make_record("q1", 0.0));
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<SampleRecord> records;
    const std::size_t n = 1 + gen() % 8;
    for (std::size_t i = 0; i < n; ++i) records.push_back(make_record("q1", gen() % 3 ? 0.0 : 1.25));
    auto g = make_group("q1", {12, 13}, records, 1.0);
    RngStream rng(static_cast<std::uint64_t>(trial), "d");
    const auto p = prepare_group(g, c, buffer, rng);
    CHECK(p.injected == 0);
    if (!p.dropped) {
      CHECK(p.advantages.group_std > 0.0);
      CHECK(p.group.classification == GroupClass::Mixed);
    } else {
      CHECK(p.group.classification != GroupClass::Mixed);
    }
  }
}

TEST_CASE("batch order interleaves the strata") {
  const auto suite = toy::make_suite(1, toy::SuiteCounts{2, 1, 2, 3}, toy::EnvConfig{});
  const auto order = batch_order(suite);
  CHECK(order == std::vector<std::size_t>{0, 2, 3, 5, 1, 4, 6, 7});
}

TEST_CASE("training invariants hold in every mode") {
  for (auto mode : {Mode::R3, Mode::GRPO, Mode::DAPO}) {
    CAPTURE(to_string(mode));
    const auto c = small_config(mode);
    const auto run = train(c);
    const std::size_t steps_per_epoch = (c.suite.total() + c.batch_size - 1) / c.batch_size;
    REQUIRE(run.metrics.size() == c.epochs * steps_per_epoch);

    std::size_t expected_rollouts = 0, reflection_rollouts = 0;
    for (std::size_t s = 0; s < run.metrics.size(); ++s) {
      const auto& m = run.metrics[s];
      CHECK(m.step == s);
      CHECK(m.epoch == 1 + s / steps_per_epoch);
      CHECK(m.solve_all_frac >= 0.0);
      CHECK(m.solve_none_frac >= 0.0);
      CHECK(m.solve_all_frac + m.solve_none_frac <= 1.0);
      CHECK(m.mean_policy_entropy >= 0.0);
      CHECK(m.mean_policy_entropy <= std::log(16.0));
      if (m.epoch == 1) CHECK(m.reflection_activations == 0);
      if (mode != Mode::R3) {
        CHECK(m.reflection_activations == 0);
        CHECK(m.replay_injections == 0);
        CHECK(m.serr_groups == 0);
      }
      if (mode != Mode::DAPO) CHECK(m.dropped_groups == 0);
      const std::size_t base = std::min(c.batch_size, c.suite.total() - (s % steps_per_epoch) * c.batch_size);
      expected_rollouts += (base + m.reflection_activations) * c.group_size;
      reflection_rollouts += m.reflection_activations * c.group_size;
    }
    // every on-policy rollout lands in the buffer
    CHECK(run.buffer.size() == expected_rollouts);
    std::size_t stored_reflection = 0;
    for (const auto& uid : run.buffer.uids()) {
      for (const auto& r : run.buffer.records(uid)) {
        stored_reflection += r.origin == Origin::Reflection;
        CHECK(r.origin != Origin::Replayed);
      }
    }
    CHECK(stored_reflection == reflection_rollouts);
    for (double rate : run.final_solve_rate) {
      CHECK(rate >= 0.0);
      CHECK(rate <= 1.0);
    }
  }
}

TEST_CASE("R3 exercises every mechanism on the small suite") {
  const auto run = train(small_config(Mode::R3));
  std::size_t injections = 0, activations = 0, serr = 0;
  for (const auto& m : run.metrics) {
    injections += m.replay_injections;
    activations += m.reflection_activations;
    serr += m.serr_groups;
  }
  CHECK(injections > 0);
  CHECK(activations > 0);
  CHECK(serr > 0);
}

TEST_CASE("the buffer stores verifier rewards, not entropy-ranking rewards") {
  const auto run = train(small_config(Mode::R3));
  for (const auto& uid : run.buffer.uids()) {
    for (const auto& r : run.buffer.records(uid)) CHECK((r.reward == 0.0 || r.reward >= 1.0));
  }
}

TEST_CASE("training is deterministic") {
  const auto c = small_config(Mode::R3);
  const auto a = train(c), b = train(c);
  std::ostringstream ma, mb, ba, bb;
  write_metrics_jsonl(a.metrics, ma);
  write_metrics_jsonl(b.metrics, mb);
  a.buffer.write_jsonl(ba);
  b.buffer.write_jsonl(bb);
  CHECK(ma.str() == mb.str());
  CHECK(ba.str() == bb.str());
  CHECK(a.policy.to_json() == b.policy.to_json());
}

TEST_CASE("invalid configurations fail before training") {
  auto c = small_config(Mode::R3);
  c.epochs = 0;
  CHECK_THROWS_AS(train(c), ValidationError);
}

TEST_CASE("compare labels, medians and CSV output") {
  auto a = small_config(Mode::R3);
  auto b = small_config(Mode::GRPO);
  a.epochs = b.epochs = 2;
  const std::vector<TrainConfig> configs{a, b, b};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto result = compare(configs, seeds);
  CHECK(result.labels == std::vector<std::string>{"r3", "grpo", "grpo#2"});
  CHECK(result.runs.size() == 9);
  CHECK(result.runs_for("grpo").size() == 3);

  const auto traj = median_trajectory(result, "r3", &StepMetrics::mean_reward);
  const auto runs = result.runs_for("r3");
  REQUIRE(traj.size() == runs[0]->metrics.size());
  for (std::size_t s = 0; s < traj.size(); ++s) {
    std::vector<double> v{runs[0]->metrics[s].mean_reward, runs[1]->metrics[s].mean_reward,
                          runs[2]->metrics[s].mean_reward};
    std::sort(v.begin(), v.end());
    CHECK(traj[s] == v[1]);
  }
  // identical configs give identical runs
  CHECK(median_trajectory(result, "grpo", &StepMetrics::solve_none_frac) ==
        median_trajectory(result, "grpo#2", &StepMetrics::solve_none_frac));

  std::ostringstream csv, strata;
  write_compare_csv(result, csv);
  write_strata_csv(result, strata);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "step,mode,seed,mean_reward,solve_all,solve_none,entropy,replay_injections,reflection_activations");
  std::size_t rows = 0, medians = 0;
  for (std::string line; std::getline(lines, line); ++rows) medians += line.find(",median,") != std::string::npos;
  CHECK(rows == (9 + 3) * traj.size());
  CHECK(medians == 3 * traj.size());
  CHECK(strata.str().rfind("mode,seed,easy,medium,hard,extreme\n", 0) == 0);
  CHECK_THROWS_AS(compare(std::vector<TrainConfig>{a}, seeds), ValidationError);
}

TEST_CASE("median helper") {
  CHECK(median({}) == 0.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("inspect_buffer filters, reports corrupt lines and accepts empty files") {
  std::string content;
  for (int i = 0; i < 11; ++i) content += nlohmann::json(make_record(i % 2 ? "q7" : "q1", 0.0)).dump() + "\n";
  const auto good = temp_file("r3_inspect_good.jsonl", content);
  std::ostringstream out;
  inspect_buffer(good, std::string("q7"), 0.2, out);
  const auto text = out.str();
  CHECK(text.find("E_peak") != std::string::npos);
  CHECK(text.find("q1") == std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 5);

  const auto bad = temp_file("r3_inspect_bad.jsonl", content + "{\"uid\": 3\n");
  try {
    std::ostringstream sink;
    inspect_buffer(bad, std::nullopt, 0.2, sink);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 12") != std::string::npos);
  }

  const auto empty = temp_file("r3_inspect_empty.jsonl", "");
  std::ostringstream none;
  CHECK_NOTHROW(inspect_buffer(empty, std::nullopt, 0.2, none));
  CHECK(none.str().empty());
  CHECK_THROWS_AS(inspect_buffer("/nonexistent/buffer.jsonl", std::nullopt, 0.2, none), IoError);
  fs::remove(good);
  fs::remove(bad);
  fs::remove(empty);
}

TEST_CASE("score_traces ranks one group in input order") {
  std::istringstream in("[0.1, 0.1, 2.0, 0.1, 0.1]\n{\"token_entropies\": [1.0, 1.0, 1.0, 1.0, 1.0]}\n\n[0.9]\n");
  std::ostringstream out;
  score_traces(in, 0.2, 0.5, out);
  CHECK(out.str() == "score,reward\n2,0.5\n0,0.125\n0,0.125\n");

  std::istringstream bad("[0.1]\n[]\n");
  std::ostringstream sink;
  CHECK_THROWS_AS(score_traces(bad, 0.2, 0.5, sink), IoError);
}
