#include "r3/replay.hpp"

#include <algorithm>

namespace r3 {

std::string_view to_string(GroupClass c) {
  switch (c) {
    case GroupClass::AllPositive:
      return "all_positive";
    case GroupClass::AllNegative:
      return "all_negative";
    case GroupClass::Mixed:
      return "mixed";
  }
  return "mixed";
}

std::vector<double> Group::rewards() const {
  std::vector<double> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.record.reward);
  return out;
}

std::size_t Group::injected() const {
  return static_cast<std::size_t>(std::count_if(members.begin(), members.end(), [](const auto& m) { return !m.on_policy; }));
}

GroupClass classify(std::span<const double> rewards, double positivity_threshold) {
  if (rewards.empty()) throw ValidationError("cannot classify an empty group");
  const auto positives = std::count_if(rewards.begin(), rewards.end(),
                                       [&](double r) { return r >= positivity_threshold; });
  if (positives == static_cast<std::ptrdiff_t>(rewards.size())) return GroupClass::AllPositive;
  if (positives == 0) return GroupClass::AllNegative;
  return GroupClass::Mixed;
}

Group make_group(std::string uid, std::vector<Token> prompt, std::vector<SampleRecord> records,
                 double positivity_threshold) {
  if (records.empty()) throw ValidationError("a group needs at least one member");
  Group group;
  group.uid = std::move(uid);
  group.prompt = std::move(prompt);
  for (auto& r : records) {
    if (r.uid != group.uid) throw ValidationError("group member uid '" + r.uid + "' differs from '" + group.uid + "'");
    group.members.push_back(GroupMember{std::move(r), true});
  }
  group.classification = classify(group.rewards(), positivity_threshold);
  return group;
}

void ReplayParams::validate() const {
  if (k < 1) throw ValidationError("replay.k must be at least 1");
}

ReplayResult augment(Group group, const SampleBuffer& buffer, const ReplayParams& params, RngStream& rng) {
  params.validate();
  if (group.members.empty()) throw ValidationError("cannot augment an empty group");
  if (group.classification == GroupClass::Mixed) return {std::move(group), 0};

  const RewardFilter filter = group.classification == GroupClass::AllNegative
                                  ? reward_at_least(params.positivity_threshold)
                                  : reward_below(params.positivity_threshold);
  auto history = buffer.retrieve(group.uid, filter, params.k, rng);
  if (history.empty()) {
    group.starved = true;
    return {std::move(group), 0};
  }
  const std::size_t injected = history.size();
  for (auto& record : history) {
    record.origin = Origin::Replayed;
    group.members.push_back(GroupMember{std::move(record), false});
  }
  return {std::move(group), injected};
}

}  // namespace r3
