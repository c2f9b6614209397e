// r3: train, compare and inspect runs on the synthetic task suite.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "r3/config.hpp"
#include "r3/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw r3::IoError("cannot write '" + path.string() + "'");
  return out;
}

int run_train(const std::string& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  auto config = r3::load_config(config_path);
  if (seed) config.seed = *seed;
  fs::create_directories(out_dir);
  const auto result = r3::train(config);

  auto metrics = open_out(out_dir / "metrics.jsonl");
  r3::write_metrics_jsonl(result.metrics, metrics);
  result.buffer.save(out_dir / "buffer.jsonl");
  open_out(out_dir / "policy.json") << result.policy.to_json().dump() << '\n';
  auto suite = open_out(out_dir / "suite.jsonl");
  r3::toy::write_suite_jsonl(result.suite, suite);
  open_out(out_dir / "config.json") << r3::to_json(config).dump(2) << '\n';

  std::cout << "mode " << r3::to_string(config.mode) << ", " << result.metrics.size() << " steps\n";
  for (auto d : r3::toy::kDifficulties) {
    std::cout << "  " << r3::toy::to_string(d) << ": " << result.final_solve_rate[static_cast<std::size_t>(d)]
              << '\n';
  }
  return 0;
}

int run_compare(const std::vector<std::string>& config_paths, std::size_t seeds, std::uint64_t first_seed,
                const fs::path& out) {
  std::vector<r3::TrainConfig> configs;
  for (const auto& p : config_paths) configs.push_back(r3::load_config(p));
  std::vector<std::uint64_t> seed_list;
  for (std::size_t i = 0; i < seeds; ++i) seed_list.push_back(first_seed + i);
  const auto result = r3::compare(configs, seed_list);

  auto csv = open_out(out);
  r3::write_compare_csv(result, csv);
  fs::path strata = out;
  strata.replace_extension(".strata.csv");
  auto strata_csv = open_out(strata);
  r3::write_strata_csv(result, strata_csv);

  std::cout << "label,easy,medium,hard,extreme\n";
  for (const auto& label : result.labels) {
    std::cout << label;
    for (auto d : r3::toy::kDifficulties) std::cout << ',' << r3::median_final_solve_rate(result, label, d);
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay, reflection and entropy-ranking training on a synthetic suite"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "Train one configuration");
  train->add_option("--config", config_path, "TOML config")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed, "Override train.seed");

  std::vector<std::string> configs;
  std::size_t seeds = 5;
  std::uint64_t first_seed = 1;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Train several configurations over several seeds");
  compare->add_option("--configs", configs, "TOML configs")->required()->expected(2, -1)->check(CLI::ExistingFile);
  compare->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  compare->add_option("--first-seed", first_seed, "First seed");
  compare->add_option("--out", compare_out, "Per-step CSV; strata go to <out>.strata.csv")->required();

  std::string buffer_path;
  std::optional<std::string> uid;
  double inspect_p = 0.2;
  auto* inspect = app.add_subcommand("inspect-buffer", "Print the records of a buffer file");
  inspect->add_option("path", buffer_path, "buffer.jsonl")->required();
  inspect->add_option("--uid", uid, "Only this query");
  inspect->add_option("--p", inspect_p, "Peak fraction for E_peak");

  std::string traces_path;
  double p = 0.2;
  double r_max = 0.5;
  auto* score = app.add_subcommand("score-traces", "Rank entropy traces as one failed group");
  score->add_option("path", traces_path, "JSONL traces, '-' for stdin")->required();
  score->add_option("--p", p, "Peak fraction");
  score->add_option("--rmax", r_max, "Maximum reward");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(config_path, out_dir, seed);
    if (*compare) return run_compare(configs, seeds, first_seed, compare_out);
    if (*inspect) {
      r3::inspect_buffer(buffer_path, uid, inspect_p, std::cout);
      return 0;
    }
    if (*score) {
      if (traces_path == "-") {
        r3::score_traces(std::cin, p, r_max, std::cout);
      } else {
        std::ifstream in(traces_path, std::ios::binary);
        if (!in) throw r3::IoError("cannot open '" + traces_path + "'");
        r3::score_traces(in, p, r_max, std::cout);
      }
      return 0;
    }
  } catch (const r3::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
