#include "r3/core.hpp"

#include <cmath>

namespace r3 {

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::OnPolicy:
      return "on_policy";
    case Origin::Replayed:
      return "replayed";
    case Origin::Reflection:
      return "reflection";
  }
  return "on_policy";
}

Origin origin_from_string(std::string_view text) {
  if (text == "on_policy") return Origin::OnPolicy;
  if (text == "replayed") return Origin::Replayed;
  if (text == "reflection") return Origin::Reflection;
  throw ValidationError("unknown origin '" + std::string(text) + "'");
}

void validate(const SampleRecord& record, std::size_t vocab_size) {
  const auto n = record.response.size();
  if (n == 0) throw ValidationError("record '" + record.uid + "' has an empty response");
  if (record.behavior_logprobs.size() != n || record.token_entropies.size() != n) {
    throw ValidationError("record '" + record.uid + "': response, behavior_logprobs and token_entropies differ in length");
  }
  if (!std::isfinite(record.reward)) {
    throw ValidationError("record '" + record.uid + "' has a non-finite reward");
  }
  if (record.epoch < 0) throw ValidationError("record '" + record.uid + "' has a negative epoch");
  const double upper = vocab_size > 0 ? std::log(static_cast<double>(vocab_size)) + 1e-9 : HUGE_VAL;
  for (double h : record.token_entropies) {
    if (!(h >= 0.0) || h > upper) {
      throw ValidationError("record '" + record.uid + "' has a token entropy outside [0, ln V]");
    }
  }
  for (double lp : record.behavior_logprobs) {
    if (!(lp <= 0.0) || !std::isfinite(lp)) {
      throw ValidationError("record '" + record.uid + "' has an invalid behavior log-probability");
    }
  }
}

void to_json(nlohmann::json& j, const SampleRecord& record) {
  j = nlohmann::json{{"uid", record.uid},
                     {"response", record.response},
                     {"behavior_logprobs", record.behavior_logprobs},
                     {"token_entropies", record.token_entropies},
                     {"reward", record.reward},
                     {"truncated", record.truncated},
                     {"epoch", record.epoch},
                     {"origin", std::string(to_string(record.origin))}};
}

void from_json(const nlohmann::json& j, SampleRecord& record) {
  j.at("uid").get_to(record.uid);
  j.at("response").get_to(record.response);
  j.at("behavior_logprobs").get_to(record.behavior_logprobs);
  j.at("token_entropies").get_to(record.token_entropies);
  j.at("reward").get_to(record.reward);
  j.at("truncated").get_to(record.truncated);
  j.at("epoch").get_to(record.epoch);
  record.origin = origin_from_string(j.at("origin").get<std::string>());
}

}  // namespace r3
