#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "r3/core.hpp"

namespace r3::testing {

// Valid record with `length` tokens; entropies and log-probs are arbitrary
// but in range.
inline SampleRecord make_record(std::string uid, double reward, std::size_t length = 3, int epoch = 1) {
  SampleRecord r;
  r.uid = std::move(uid);
  for (std::size_t i = 0; i < length; ++i) {
    r.response.push_back(static_cast<Token>(1 + i % 5));
    r.behavior_logprobs.push_back(-0.5 - 0.1 * static_cast<double>(i));
    r.token_entropies.push_back(0.2 + 0.1 * static_cast<double>(i % 7));
  }
  r.response.back() = kTerminator;
  r.reward = reward;
  r.epoch = epoch;
  return r;
}

inline bool near(double a, double b, double tol = 1e-12) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

}  // namespace r3::testing
