#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace r3 {

using Token = std::int32_t;

// Token id that ends an answer. Responses without it are truncated.
inline constexpr Token kTerminator = 0;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a group has zero reward variance and no stability constant.
class DegenerateGroupError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Origin { OnPolicy, Replayed, Reflection };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view text);

/// One stored trajectory. The three per-token arrays are aligned and cover
/// non-padding tokens only.
struct SampleRecord {
  std::string uid;
  std::vector<Token> response;
  std::vector<double> behavior_logprobs;  // nats, under the generating policy
  std::vector<double> token_entropies;    // nats, entropy of each sampling step
  double reward = 0.0;
  bool truncated = false;
  int epoch = 0;
  Origin origin = Origin::OnPolicy;

  std::size_t length() const noexcept { return response.size(); }
};

// Throws ValidationError when the record breaks an invariant. A vocab_size of
// zero skips the entropy upper bound.
void validate(const SampleRecord& record, std::size_t vocab_size = 0);

void to_json(nlohmann::json& j, const SampleRecord& record);
void from_json(const nlohmann::json& j, SampleRecord& record);

}  // namespace r3
