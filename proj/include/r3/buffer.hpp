#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "r3/core.hpp"
#include "r3/rng.hpp"

namespace r3 {

using RewardFilter = std::function<bool(double)>;

RewardFilter any_reward();
RewardFilter reward_at_least(double threshold);
RewardFilter reward_below(double threshold);

struct BufferOptions {
  std::size_t capacity = 100000;
  std::size_t vocab_size = 0;  // 0 disables the ln V entropy bound
};

/// Archive of every generated trajectory, keyed by query uid.
///
/// All member functions lock an internal mutex, so rollout workers may insert
/// and retrieve concurrently. When the archive is full, the oldest record of
/// the uid holding the most records is evicted (ties go to the uid whose oldest
/// record is oldest overall).
class SampleBuffer {
 public:
  explicit SampleBuffer(BufferOptions options = {});
  SampleBuffer(const SampleBuffer& other);
  SampleBuffer(SampleBuffer&& other) noexcept;
  SampleBuffer& operator=(SampleBuffer other) noexcept;
  ~SampleBuffer() = default;

  void insert(SampleRecord record);

  // At most `limit` records of `uid` whose reward passes `filter`. When more
  // records match, a uniform subset is drawn from `rng`; the result is returned
  // in insertion order.
  std::vector<SampleRecord> retrieve(std::string_view uid, const RewardFilter& filter, std::size_t limit,
                                     RngStream& rng) const;

  // Mean reward over the `window` most recent records of `uid`.
  std::optional<double> history_mean_reward(std::string_view uid, std::size_t window) const;

  std::vector<SampleRecord> records(std::string_view uid) const;
  std::vector<std::string> uids() const;
  std::size_t size() const;
  std::size_t count(std::string_view uid) const;
  const BufferOptions& options() const noexcept { return options_; }

  // JSON Lines, one record per line, global insertion order.
  void write_jsonl(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static SampleBuffer read_jsonl(std::istream& in, BufferOptions options = {});
  static SampleBuffer load(const std::filesystem::path& path, BufferOptions options = {});

  friend void swap(SampleBuffer& a, SampleBuffer& b) noexcept;

 private:
  struct Entry {
    std::uint64_t seq;
    SampleRecord record;
  };

  void evict_one_locked();

  BufferOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<Entry>, std::less<>> by_uid_;
  std::uint64_t next_seq_ = 0;
  std::size_t total_ = 0;
};

}  // namespace r3
