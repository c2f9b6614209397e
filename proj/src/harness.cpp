#include "r3/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "r3/reflection.hpp"
#include "r3/rewarding.hpp"
#include "r3/serr.hpp"

namespace r3 {

nlohmann::json to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"epoch", m.epoch},
          {"mean_reward", m.mean_reward},
          {"solve_all_frac", m.solve_all_frac},
          {"solve_none_frac", m.solve_none_frac},
          {"mean_policy_entropy", m.mean_policy_entropy},
          {"replay_injections", m.replay_injections},
          {"reflection_activations", m.reflection_activations},
          {"serr_groups", m.serr_groups},
          {"starved_groups", m.starved_groups},
          {"dropped_groups", m.dropped_groups},
          {"gradient_norm", m.gradient_norm}};
}

void write_metrics_jsonl(std::span<const StepMetrics> metrics, std::ostream& out) {
  for (const auto& m : metrics) out << to_json(m).dump() << '\n';
}

PreparedGroup prepare_group(Group group, const TrainConfig& config, const SampleBuffer& buffer, RngStream& rng) {
  PreparedGroup out;
  AdvantageParams params = config.advantage;
  params.alpha = 1.0;

  switch (config.mode) {
    case Mode::GRPO:
      break;
    case Mode::DAPO:
      if (group.classification != GroupClass::Mixed) {
        out.dropped = true;
        out.group = std::move(group);
        return out;
      }
      break;
    case Mode::R3: {
      if (group.classification == GroupClass::AllNegative) {
        std::vector<std::vector<double>> traces;
        for (const auto& m : group.members) traces.push_back(m.record.token_entropies);
        const auto rewards = serr::rewards_for_traces(traces, config.serr);
        for (std::size_t i = 0; i < rewards.size(); ++i) group.members[i].record.reward = rewards[i];
        out.serr_applied = true;
      }
      auto replayed = augment(std::move(group), buffer, config.replay, rng);
      group = std::move(replayed.group);
      out.injected = replayed.injected;
      if (out.injected > 0) params.alpha = config.advantage.alpha;
      break;
    }
  }

  out.advantages = group_advantages(group.rewards(), params);
  out.group = std::move(group);
  return out;
}

ObjectiveGroup objective_group(const PreparedGroup& prepared) {
  ObjectiveGroup og;
  og.cls = prepared.group.uid;
  const auto& members = prepared.group.members;
  for (std::size_t i = 0; i < members.size(); ++i) {
    og.members.push_back(ObjectiveMember{prepared.group.prompt, members[i].record.response,
                                         members[i].record.behavior_logprobs, prepared.advantages.advantages[i]});
  }
  return og;
}

std::vector<std::size_t> batch_order(std::span<const toy::Task> suite) {
  std::array<std::vector<std::size_t>, 4> strata;
  for (std::size_t i = 0; i < suite.size(); ++i) strata[static_cast<std::size_t>(suite[i].difficulty)].push_back(i);
  std::vector<std::size_t> order;
  order.reserve(suite.size());
  for (std::size_t round = 0; order.size() < suite.size(); ++round) {
    for (const auto& s : strata) {
      if (round < s.size()) order.push_back(s[round]);
    }
  }
  return order;
}

StratumRates evaluate(const Policy& policy, std::span<const toy::Task> suite, const TrainConfig& config) {
  StratumRates sums{};
  std::array<std::size_t, 4> counts{};
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& task = suite[i];
    std::size_t solved = 0;
    for (std::size_t j = 0; j < config.eval_rollouts; ++j) {
      RngStream rng(config.seed, "eval", {i, j});
      const auto record = toy::rollout(policy, task.uid, task.prompt, config.env.t_max, rng);
      if (verify(record.response, task.gold)) ++solved;
    }
    const auto d = static_cast<std::size_t>(task.difficulty);
    if (config.eval_rollouts > 0) sums[d] += static_cast<double>(solved) / static_cast<double>(config.eval_rollouts);
    ++counts[d];
  }
  for (std::size_t d = 0; d < 4; ++d) sums[d] = counts[d] ? sums[d] / static_cast<double>(counts[d]) : 0.0;
  return sums;
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  auto suite = toy::make_suite(config.seed, config.suite, config.env, config.prior);
  auto policy = toy::make_initial_policy(suite, config.env, config.reflection.guidance, config.seed, config.prior);
  const TabularPolicy reference = policy;
  SampleBuffer buffer(BufferOptions{config.buffer_capacity, config.env.vocab_size});

  std::map<std::string, const toy::Task*, std::less<>> by_uid;
  for (const auto& task : suite) by_uid.emplace(task.uid, &task);
  const auto order = batch_order(suite);
  const double threshold = config.replay.positivity_threshold;

  std::vector<StepMetrics> metrics;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<Query> base;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& task = suite[order[i]];
        base.push_back(Query{task.uid, task.prompt, Origin::OnPolicy});
      }
      const std::size_t base_count = base.size();

      StepMetrics m;
      m.step = step;
      m.epoch = epoch;
      std::vector<Query> queries;
      if (config.mode == Mode::R3 && config.reflection_enabled) {
        RngStream rng(config.seed, "reflection", {step});
        auto augmented = augment_batch(std::move(base), static_cast<int>(epoch), buffer, config.reflection, rng);
        queries = std::move(augmented.queries);
        m.reflection_activations = augmented.activations;
      } else {
        queries = std::move(base);
      }

      // Sampling phase: the policy is frozen until every group is drawn.
      std::vector<Group> groups;
      double reward_sum = 0.0, entropy_sum = 0.0;
      std::size_t rollouts = 0, tokens = 0, solve_all = 0, solve_none = 0;
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& query = queries[qi];
        const auto& task = *by_uid.at(query.uid);
        std::vector<SampleRecord> records;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < config.group_size; ++i) {
          RngStream rng(config.seed, "rollout", {step, qi, i});
          auto record = toy::rollout(policy, query.uid, query.prompt, config.env.t_max, rng);
          record.reward = total_reward(record.response, task.gold, config.reward);
          record.epoch = static_cast<int>(epoch);
          record.origin = query.origin;
          if (record.reward >= threshold) ++correct;
          reward_sum += record.reward;
          for (double h : record.token_entropies) entropy_sum += h;
          tokens += record.length();
          ++rollouts;
          records.push_back(std::move(record));
        }
        if (qi < base_count) {
          if (correct == config.group_size) ++solve_all;
          if (correct == 0) ++solve_none;
        }
        groups.push_back(make_group(query.uid, query.prompt, std::move(records), threshold));
      }
      m.mean_reward = rollouts ? reward_sum / static_cast<double>(rollouts) : 0.0;
      m.mean_policy_entropy = tokens ? entropy_sum / static_cast<double>(tokens) : 0.0;
      m.solve_all_frac = static_cast<double>(solve_all) / static_cast<double>(base_count);
      m.solve_none_frac = static_cast<double>(solve_none) / static_cast<double>(base_count);

      // The buffer keeps verifier rewards; entropy-ranking rewards only shape
      // this step's advantages.
      std::vector<SampleRecord> fresh;
      fresh.reserve(rollouts);
      for (const auto& g : groups) {
        for (const auto& member : g.members) fresh.push_back(member.record);
      }

      std::vector<PreparedGroup> prepared;
      for (std::size_t qi = 0; qi < groups.size(); ++qi) {
        RngStream rng(config.seed, "replay", {step, qi});
        prepared.push_back(prepare_group(std::move(groups[qi]), config, buffer, rng));
        const auto& p = prepared.back();
        m.replay_injections += p.injected;
        if (p.serr_applied) ++m.serr_groups;
        if (p.group.starved) ++m.starved_groups;
        if (p.dropped) ++m.dropped_groups;
      }

      // Buffer update with every on-policy rollout, after replay retrieval.
      for (auto& record : fresh) buffer.insert(std::move(record));

      LogitGradient gradient;
      for (const auto& p : prepared) {
        if (p.dropped) continue;
        accumulate(gradient, objective_gradient(policy, objective_group(p), reference, config.objective));
      }
      m.gradient_norm = gradient_norm(gradient);
      apply_update(policy, gradient, config.learning_rate);
      metrics.push_back(m);
    }
  }

  auto rates = evaluate(policy, suite, config);
  return TrainResult{std::move(suite), std::move(policy), std::move(buffer), std::move(metrics), rates};
}

std::vector<const CompareRun*> CompareResult::runs_for(std::string_view label) const {
  std::vector<const CompareRun*> out;
  for (const auto& run : runs) {
    if (run.label == label) out.push_back(&run);
  }
  return out;
}

CompareResult compare(std::span<const TrainConfig> configs, std::span<const std::uint64_t> seeds) {
  if (configs.size() < 2) throw ValidationError("compare needs at least two configurations");
  if (seeds.empty()) throw ValidationError("compare needs at least one seed");
  CompareResult result;
  for (const auto& base : configs) {
    std::string label(to_string(base.mode));
    if (std::find(result.labels.begin(), result.labels.end(), label) != result.labels.end()) {
      label += "#" + std::to_string(result.labels.size());
    }
    result.labels.push_back(label);
    for (auto seed : seeds) {
      TrainConfig config = base;
      config.seed = seed;
      auto trained = train(config);
      result.runs.push_back(CompareRun{label, seed, std::move(trained.metrics), trained.final_solve_rate});
    }
  }
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> median_trajectory(const CompareResult& result, std::string_view label,
                                      double StepMetrics::*field) {
  const auto runs = result.runs_for(label);
  if (runs.empty()) return {};
  std::size_t steps = runs.front()->metrics.size();
  for (const auto* run : runs) steps = std::min(steps, run->metrics.size());
  std::vector<double> out(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<double> values;
    for (const auto* run : runs) values.push_back(run->metrics[s].*field);
    out[s] = median(std::move(values));
  }
  return out;
}

double median_final_solve_rate(const CompareResult& result, std::string_view label, toy::Difficulty d) {
  std::vector<double> values;
  for (const auto* run : result.runs_for(label)) values.push_back(run->final_solve_rate[static_cast<std::size_t>(d)]);
  return median(std::move(values));
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

}  // namespace

void write_compare_csv(const CompareResult& result, std::ostream& out) {
  out << "step,mode,seed,mean_reward,solve_all,solve_none,entropy,replay_injections,reflection_activations\n";
  for (const auto& run : result.runs) {
    for (const auto& m : run.metrics) {
      out << m.step << ',' << run.label << ',' << run.seed << ',' << fmt(m.mean_reward) << ','
          << fmt(m.solve_all_frac) << ',' << fmt(m.solve_none_frac) << ',' << fmt(m.mean_policy_entropy) << ','
          << m.replay_injections << ',' << m.reflection_activations << '\n';
    }
  }
  for (const auto& label : result.labels) {
    const auto reward = median_trajectory(result, label, &StepMetrics::mean_reward);
    const auto all = median_trajectory(result, label, &StepMetrics::solve_all_frac);
    const auto none = median_trajectory(result, label, &StepMetrics::solve_none_frac);
    const auto entropy = median_trajectory(result, label, &StepMetrics::mean_policy_entropy);
    const auto runs = result.runs_for(label);
    for (std::size_t s = 0; s < reward.size(); ++s) {
      std::vector<double> injections, activations;
      for (const auto* run : runs) {
        injections.push_back(static_cast<double>(run->metrics[s].replay_injections));
        activations.push_back(static_cast<double>(run->metrics[s].reflection_activations));
      }
      out << s << ',' << label << ",median," << fmt(reward[s]) << ',' << fmt(all[s]) << ',' << fmt(none[s]) << ','
          << fmt(entropy[s]) << ',' << fmt(median(injections)) << ',' << fmt(median(activations)) << '\n';
    }
  }
}

void write_strata_csv(const CompareResult& result, std::ostream& out) {
  out << "mode,seed,easy,medium,hard,extreme\n";
  for (const auto& run : result.runs) {
    out << run.label << ',' << run.seed;
    for (double r : run.final_solve_rate) out << ',' << fmt(r);
    out << '\n';
  }
  for (const auto& label : result.labels) {
    out << label << ",median";
    for (auto d : toy::kDifficulties) out << ',' << fmt(median_final_solve_rate(result, label, d));
    out << '\n';
  }
}

void inspect_buffer(const std::filesystem::path& path, const std::optional<std::string>& uid, double p,
                    std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open buffer file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SampleRecord record;
    try {
      record = nlohmann::json::parse(line).get<SampleRecord>();
      validate(record);
    } catch (const std::exception& e) {
      throw IoError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (uid && record.uid != *uid) continue;
    if (!header) {
      out << std::left << std::setw(8) << "uid" << std::setw(7) << "epoch" << std::setw(12) << "origin"
          << std::setw(10) << "reward" << std::setw(10) << "truncated" << std::setw(8) << "length" << std::setw(10)
          << "E_peak" << "E_global\n";
      header = true;
    }
    const auto prof = serr::profile(record.token_entropies, p);
    out << std::left << std::setw(8) << record.uid << std::setw(7) << record.epoch << std::setw(12)
        << to_string(record.origin) << std::setw(10) << fmt(record.reward) << std::setw(10)
        << (record.truncated ? "yes" : "no") << std::setw(8) << record.length() << std::setw(10)
        << fmt(prof.peak) << fmt(prof.global) << '\n';
  }
}

void score_traces(std::istream& in, double p, double r_max, std::ostream& out) {
  std::vector<std::vector<double>> traces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      traces.push_back(j.is_array() ? j.get<std::vector<double>>() : j.at("token_entropies").get<std::vector<double>>());
      if (traces.back().empty()) throw ValidationError("empty entropy trace");
    } catch (const std::exception& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  out << "score,reward\n";
  if (traces.empty()) return;
  const serr::SerrParams params{p, r_max};
  params.validate();
  std::vector<serr::EntropyProfile> profiles;
  for (const auto& t : traces) profiles.push_back(serr::profile(t, p));
  const auto scores = serr::dominance_scores(profiles);
  const auto rewards = serr::rank_rewards(scores, r_max);
  for (std::size_t i = 0; i < scores.size(); ++i) out << scores[i] << ',' << fmt(rewards[i]) << '\n';
}

}  // namespace r3
