#include "r3/buffer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

namespace r3 {

RewardFilter any_reward() {
  return [](double) { return true; };
}

RewardFilter reward_at_least(double threshold) {
  return [threshold](double r) { return r >= threshold; };
}

RewardFilter reward_below(double threshold) {
  return [threshold](double r) { return r < threshold; };
}

SampleBuffer::SampleBuffer(BufferOptions options) : options_(options) {
  if (options_.capacity == 0) throw ValidationError("buffer capacity must be at least 1");
}

SampleBuffer::SampleBuffer(const SampleBuffer& other) {
  std::lock_guard lock(other.mutex_);
  options_ = other.options_;
  by_uid_ = other.by_uid_;
  next_seq_ = other.next_seq_;
  total_ = other.total_;
}

SampleBuffer::SampleBuffer(SampleBuffer&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  options_ = other.options_;
  by_uid_ = std::move(other.by_uid_);
  next_seq_ = other.next_seq_;
  total_ = other.total_;
  other.total_ = 0;
}

SampleBuffer& SampleBuffer::operator=(SampleBuffer other) noexcept {
  swap(*this, other);
  return *this;
}

void swap(SampleBuffer& a, SampleBuffer& b) noexcept {
  if (&a == &b) return;
  std::scoped_lock lock(a.mutex_, b.mutex_);
  std::swap(a.options_, b.options_);
  std::swap(a.by_uid_, b.by_uid_);
  std::swap(a.next_seq_, b.next_seq_);
  std::swap(a.total_, b.total_);
}

void SampleBuffer::insert(SampleRecord record) {
  validate(record, options_.vocab_size);
  std::lock_guard lock(mutex_);
  auto it = by_uid_.find(record.uid);
  if (it == by_uid_.end()) it = by_uid_.emplace(record.uid, std::deque<Entry>{}).first;
  it->second.push_back(Entry{next_seq_++, std::move(record)});
  ++total_;
  while (total_ > options_.capacity) evict_one_locked();
}

void SampleBuffer::evict_one_locked() {
  auto victim = by_uid_.end();
  for (auto it = by_uid_.begin(); it != by_uid_.end(); ++it) {
    if (it->second.empty()) continue;
    if (victim == by_uid_.end() || it->second.size() > victim->second.size() ||
        (it->second.size() == victim->second.size() && it->second.front().seq < victim->second.front().seq)) {
      victim = it;
    }
  }
  victim->second.pop_front();
  --total_;
  if (victim->second.empty()) by_uid_.erase(victim);
}

std::vector<SampleRecord> SampleBuffer::retrieve(std::string_view uid, const RewardFilter& filter, std::size_t limit,
                                                 RngStream& rng) const {
  if (limit == 0) throw ValidationError("retrieve limit must be at least 1");
  std::lock_guard lock(mutex_);
  auto it = by_uid_.find(uid);
  if (it == by_uid_.end()) return {};

  const auto& entries = it->second;
  std::vector<std::size_t> matches;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (filter(entries[i].record.reward)) matches.push_back(i);
  }
  if (matches.size() > limit) {
    // partial Fisher-Yates
    for (std::size_t i = 0; i < limit; ++i) {
      std::swap(matches[i], matches[i + rng.index(matches.size() - i)]);
    }
    matches.resize(limit);
    std::sort(matches.begin(), matches.end());
  }
  std::vector<SampleRecord> out;
  out.reserve(matches.size());
  for (auto i : matches) out.push_back(entries[i].record);
  return out;
}

std::optional<double> SampleBuffer::history_mean_reward(std::string_view uid, std::size_t window) const {
  if (window == 0) throw ValidationError("history window must be at least 1");
  std::lock_guard lock(mutex_);
  auto it = by_uid_.find(uid);
  if (it == by_uid_.end() || it->second.empty()) return std::nullopt;
  const auto& entries = it->second;
  const std::size_t n = std::min(window, entries.size());
  double sum = 0.0;
  for (std::size_t i = entries.size() - n; i < entries.size(); ++i) sum += entries[i].record.reward;
  return sum / static_cast<double>(n);
}

std::vector<SampleRecord> SampleBuffer::records(std::string_view uid) const {
  std::lock_guard lock(mutex_);
  std::vector<SampleRecord> out;
  if (auto it = by_uid_.find(uid); it != by_uid_.end()) {
    for (const auto& e : it->second) out.push_back(e.record);
  }
  return out;
}

std::vector<std::string> SampleBuffer::uids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [uid, entries] : by_uid_) out.push_back(uid);
  return out;
}

std::size_t SampleBuffer::size() const {
  std::lock_guard lock(mutex_);
  return total_;
}

std::size_t SampleBuffer::count(std::string_view uid) const {
  std::lock_guard lock(mutex_);
  auto it = by_uid_.find(uid);
  return it == by_uid_.end() ? 0 : it->second.size();
}

void SampleBuffer::write_jsonl(std::ostream& out) const {
  std::lock_guard lock(mutex_);
  std::vector<const Entry*> all;
  all.reserve(total_);
  for (const auto& [uid, entries] : by_uid_) {
    for (const auto& e : entries) all.push_back(&e);
  }
  std::sort(all.begin(), all.end(), [](const Entry* a, const Entry* b) { return a->seq < b->seq; });
  for (const auto* e : all) out << nlohmann::json(e->record).dump() << '\n';
}

void SampleBuffer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_jsonl(out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

SampleBuffer SampleBuffer::read_jsonl(std::istream& in, BufferOptions options) {
  SampleBuffer buffer(options);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      buffer.insert(nlohmann::json::parse(line).get<SampleRecord>());
    } catch (const std::exception& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return buffer;
}

SampleBuffer SampleBuffer::load(const std::filesystem::path& path, BufferOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return read_jsonl(in, options);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace r3
