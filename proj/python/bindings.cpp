// Python bindings for the training core.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "r3/config.hpp"
#include "r3/harness.hpp"
#include "r3/optimizer.hpp"
#include "r3/rewarding.hpp"
#include "r3/serr.hpp"

namespace py = pybind11;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict rates_dict(const r3::StratumRates& rates) {
  py::dict out;
  for (auto d : r3::toy::kDifficulties) out[py::str(std::string(r3::toy::to_string(d)))] = rates[static_cast<std::size_t>(d)];
  return out;
}

py::list metrics_list(const std::vector<r3::StepMetrics>& metrics) {
  py::list out;
  for (const auto& m : metrics) out.append(to_python(r3::to_json(m)));
  return out;
}

r3::TrainConfig config_from(const std::string& toml, std::optional<std::uint64_t> seed) {
  auto config = r3::parse_config(toml, "config");
  if (seed) config.seed = *seed;
  return config;
}

}  // namespace

PYBIND11_MODULE(_r3, m) {
  m.doc() = "Replay, reflection and entropy-ranking policy optimization on a synthetic task suite";

  static py::exception<r3::ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
  static py::exception<r3::DegenerateGroupError> degenerate_error(m, "DegenerateGroupError", PyExc_ArithmeticError);
  static py::exception<r3::IoError> io_error(m, "IoError", PyExc_OSError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const r3::ValidationError& e) {
      py::set_error(validation_error, e.what());
    } catch (const r3::DegenerateGroupError& e) {
      py::set_error(degenerate_error, e.what());
    } catch (const r3::IoError& e) {
      py::set_error(io_error, e.what());
    }
  });

  m.def(
      "advantages",
      [](const std::vector<double>& rewards, double alpha, double lam, const std::string& std_mode) {
        return r3::group_advantages(rewards, r3::AdvantageParams{alpha, lam, r3::std_mode_from_string(std_mode)})
            .advantages;
      },
      py::arg("rewards"), py::arg("alpha") = 1.5, py::arg("lam") = 1e-4, py::arg("std_mode") = "population",
      "(R - mean) / (alpha * std + lam) over one group.");

  m.def("length_bonus", &r3::length_bonus, py::arg("length"), py::arg("length_max"));
  m.def(
      "verify", [](const std::vector<r3::Token>& response, const std::vector<r3::Token>& gold) { return r3::verify(response, gold); },
      py::arg("response"), py::arg("gold"));

  m.def(
      "token_entropy", [](const std::vector<double>& distribution) { return r3::serr::token_entropy(distribution); },
      py::arg("distribution"));
  m.def(
      "entropy_profile",
      [](const std::vector<double>& entropies, double p) {
        const auto prof = r3::serr::profile(entropies, p);
        return py::make_tuple(prof.peak, prof.global, prof.k_top);
      },
      py::arg("entropies"), py::arg("p") = 0.2, "Returns (peak, global, k_top).");
  m.def(
      "dominance_scores",
      [](const std::vector<std::pair<double, double>>& profiles) {
        std::vector<r3::serr::EntropyProfile> ps;
        for (const auto& [peak, global] : profiles) ps.push_back(r3::serr::EntropyProfile{peak, global, 1, 1});
        return r3::serr::dominance_scores(ps);
      },
      py::arg("profiles"), "Scores for (peak, global) pairs.");
  m.def(
      "rank_rewards", [](const std::vector<std::size_t>& scores, double r_max) { return r3::serr::rank_rewards(scores, r_max); },
      py::arg("scores"), py::arg("r_max") = 0.5);
  m.def(
      "entropy_rank_rewards",
      [](const std::vector<std::vector<double>>& traces, double p, double r_max) {
        return r3::serr::rewards_for_traces(traces, r3::serr::SerrParams{p, r_max});
      },
      py::arg("traces"), py::arg("p") = 0.2, py::arg("r_max") = 0.5);

  m.def(
      "validate_config", [](const std::string& toml) { return to_python(r3::to_json(r3::parse_config(toml, "config"))); },
      py::arg("toml") = "", "Parses TOML text and returns the resolved configuration.");

  m.def(
      "train",
      [](const std::string& toml, std::optional<std::uint64_t> seed) {
        const auto config = config_from(toml, seed);
        r3::TrainResult result = [&] {
          py::gil_scoped_release release;
          return r3::train(config);
        }();
        std::ostringstream buffer;
        result.buffer.write_jsonl(buffer);
        py::dict out;
        out["metrics"] = metrics_list(result.metrics);
        out["final_solve_rate"] = rates_dict(result.final_solve_rate);
        out["buffer_jsonl"] = buffer.str();
        return out;
      },
      py::arg("toml") = "", py::arg("seed") = py::none(),
      "Trains one configuration. Returns metrics, per-stratum solve rates and the buffer as JSON Lines.");

  m.def(
      "compare",
      [](const std::vector<std::string>& tomls, const std::vector<std::uint64_t>& seeds) {
        std::vector<r3::TrainConfig> configs;
        for (const auto& t : tomls) configs.push_back(config_from(t, std::nullopt));
        r3::CompareResult result = [&] {
          py::gil_scoped_release release;
          return r3::compare(configs, seeds);
        }();
        py::list runs;
        for (const auto& run : result.runs) {
          py::dict d;
          d["label"] = run.label;
          d["seed"] = run.seed;
          d["metrics"] = metrics_list(run.metrics);
          d["final_solve_rate"] = rates_dict(run.final_solve_rate);
          runs.append(d);
        }
        std::ostringstream csv;
        r3::write_compare_csv(result, csv);
        py::dict out;
        out["labels"] = result.labels;
        out["runs"] = runs;
        out["csv"] = csv.str();
        return out;
      },
      py::arg("tomls"), py::arg("seeds"));
}
