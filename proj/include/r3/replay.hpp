#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "r3/buffer.hpp"
#include "r3/core.hpp"
#include "r3/rng.hpp"

namespace r3 {

enum class GroupClass { AllPositive, AllNegative, Mixed };

std::string_view to_string(GroupClass c);

struct GroupMember {
  SampleRecord record;
  bool on_policy = true;
};

/// Responses to one query: the on-policy rollouts followed by any injected
/// historical samples (together, the mixed group).
struct Group {
  std::string uid;
  std::vector<Token> prompt;  // query the members are scored under
  std::vector<GroupMember> members;
  GroupClass classification = GroupClass::Mixed;
  bool starved = false;  // replay wanted an opposing sample and found none

  std::vector<double> rewards() const;
  std::size_t injected() const;
};

// AllPositive iff every reward >= threshold, AllNegative iff every reward is
// below it, Mixed otherwise.
GroupClass classify(std::span<const double> rewards, double positivity_threshold);

// Builds an on-policy group and classifies it.
Group make_group(std::string uid, std::vector<Token> prompt, std::vector<SampleRecord> records,
                 double positivity_threshold);

struct ReplayParams {
  std::size_t k = 2;
  double positivity_threshold = 1.0;

  void validate() const;
};

struct ReplayResult {
  Group group;
  std::size_t injected = 0;
};

/// Cross-context replay. An AllNegative group receives up to k positive
/// historical samples of the same uid, an AllPositive group up to k negative
/// ones; Mixed groups pass through untouched. Injected copies are tagged
/// Replayed and off-policy. When no opposing sample exists the group is
/// returned unchanged with `starved` set.
ReplayResult augment(Group group, const SampleBuffer& buffer, const ReplayParams& params, RngStream& rng);

}  // namespace r3
