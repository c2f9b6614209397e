#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <atomic>
#include <thread>

#include "helpers.hpp"
#include "r3/buffer.hpp"

using namespace r3;
using r3::testing::make_record;

TEST_CASE("insert then retrieve returns the record") {
  SampleBuffer buffer;
  buffer.insert(make_record("q1", 1.0));
  RngStream rng(1, "t");
  const auto got = buffer.retrieve("q1", any_reward(), 10, rng);
  REQUIRE(got.size() == 1);
  CHECK(got[0].reward == 1.0);
}

TEST_CASE("insert rejects mismatched lengths") {
  SampleBuffer buffer;
  auto r = make_record("q1", 0.0);
  r.token_entropies.pop_back();
  CHECK_THROWS_AS(buffer.insert(r), ValidationError);
  CHECK(buffer.size() == 0);
}

TEST_CASE("capacity eviction keeps the newest records") {
  SampleBuffer buffer(BufferOptions{2, 0});
  for (int i = 0; i < 3; ++i) buffer.insert(make_record("q1", i, 3, i));
  RngStream rng(1, "t");
  const auto got = buffer.retrieve("q1", any_reward(), 10, rng);
  REQUIRE(got.size() == 2);
  CHECK(got[0].epoch == 1);
  CHECK(got[1].epoch == 2);
}

TEST_CASE("eviction takes the oldest record of the largest uid") {
  SampleBuffer buffer(BufferOptions{4, 0});
  buffer.insert(make_record("a", 0.0, 3, 0));
  buffer.insert(make_record("b", 0.0, 3, 1));
  buffer.insert(make_record("b", 0.0, 3, 2));
  buffer.insert(make_record("b", 0.0, 3, 3));
  buffer.insert(make_record("a", 0.0, 3, 4));  // b has 3 records: its oldest goes
  CHECK(buffer.count("a") == 2);
  CHECK(buffer.count("b") == 2);
  CHECK(buffer.records("b").front().epoch == 2);
  buffer.insert(make_record("c", 0.0, 3, 5));  // a and b tie at 2; a's oldest is older
  CHECK(buffer.count("a") == 1);
  CHECK(buffer.records("a").front().epoch == 4);
  CHECK(buffer.size() == 4);
}

TEST_CASE("retrieve filters by uid and reward") {
  SampleBuffer buffer;
  buffer.insert(make_record("q1", 1.0));
  buffer.insert(make_record("q1", 0.0));
  buffer.insert(make_record("q2", 1.0));
  RngStream rng(1, "t");
  const auto got = buffer.retrieve("q1", [](double r) { return r > 0.5; }, 5, rng);
  REQUIRE(got.size() == 1);
  CHECK(got[0].uid == "q1");
  CHECK(got[0].reward == 1.0);
  CHECK(buffer.retrieve("nobody", any_reward(), 3, rng).empty());
  CHECK_THROWS_AS(buffer.retrieve("q1", any_reward(), 0, rng), ValidationError);
}

TEST_CASE("retrieve is deterministic for a fixed stream") {
  SampleBuffer buffer;
  for (int i = 0; i < 4; ++i) buffer.insert(make_record("q1", 0.0, 3, i));
  RngStream a(9, "pick"), b(9, "pick");
  const auto x = buffer.retrieve("q1", any_reward(), 1, a);
  const auto y = buffer.retrieve("q1", any_reward(), 1, b);
  REQUIRE(x.size() == 1);
  CHECK(x[0].epoch == y[0].epoch);
}

TEST_CASE("retrieve picks every match with about equal frequency") {
  SampleBuffer buffer;
  for (int i = 0; i < 4; ++i) buffer.insert(make_record("q1", 0.0, 3, i));
  std::vector<int> counts(4, 0);
  for (std::uint64_t s = 0; s < 4000; ++s) {
    RngStream rng(s, "freq");
    ++counts[static_cast<std::size_t>(buffer.retrieve("q1", any_reward(), 1, rng)[0].epoch)];
  }
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("history_mean_reward examples") {
  SampleBuffer buffer;
  CHECK_FALSE(buffer.history_mean_reward("q1", 3).has_value());
  buffer.insert(make_record("q1", 0.0));
  buffer.insert(make_record("q1", 0.0));
  buffer.insert(make_record("q1", 1.0));
  CHECK(*buffer.history_mean_reward("q1", 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(*buffer.history_mean_reward("q1", 1) == 1.0);
  SampleBuffer single;
  single.insert(make_record("q2", 1.0));
  CHECK(*single.history_mean_reward("q2", 8) == 1.0);
  CHECK_THROWS_AS(single.history_mean_reward("q2", 0), ValidationError);
}

TEST_CASE("property: retrieval never crosses uids") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    SampleBuffer buffer(BufferOptions{1 + gen() % 40, 0});
    const int n = static_cast<int>(gen() % 60);
    for (int i = 0; i < n; ++i) {
      buffer.insert(make_record("q" + std::to_string(gen() % 5), static_cast<double>(gen() % 3) * 0.5));
    }
    CHECK(buffer.size() <= buffer.options().capacity);
    for (int u = 0; u < 5; ++u) {
      const std::string uid = "q" + std::to_string(u);
      RngStream rng(static_cast<std::uint64_t>(trial), "iso", {static_cast<std::uint64_t>(u)});
      const auto got = buffer.retrieve(uid, any_reward(), 1 + gen() % 10, rng);
      for (const auto& r : got) CHECK(r.uid == uid);
    }
  }
}

TEST_CASE("property: a zero reward never raises the history mean") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> reward(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    SampleBuffer buffer;
    const int n = 1 + static_cast<int>(gen() % 20);
    for (int i = 0; i < n; ++i) buffer.insert(make_record("q", reward(gen)));
    const std::size_t window = 1 + gen() % 25;
    const double before = *buffer.history_mean_reward("q", window);
    buffer.insert(make_record("q", 0.0));
    CHECK(*buffer.history_mean_reward("q", window) <= before + 1e-15);
  }
}

TEST_CASE("property: JSONL round trip preserves retrieval") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 50; ++trial) {
    SampleBuffer buffer;
    const int n = 1 + static_cast<int>(gen() % 30);
    for (int i = 0; i < n; ++i) {
      auto r = make_record("q" + std::to_string(gen() % 4), static_cast<double>(gen() % 4) * 0.5,
                           1 + gen() % 6, static_cast<int>(gen() % 5));
      r.origin = static_cast<Origin>(gen() % 3);
      r.behavior_logprobs[0] = -static_cast<double>(gen() % 1000) / 997.0;
      buffer.insert(r);
    }
    std::stringstream text;
    buffer.write_jsonl(text);
    const std::string first = text.str();
    const auto loaded = SampleBuffer::read_jsonl(text);
    std::ostringstream again;
    loaded.write_jsonl(again);
    CHECK(again.str() == first);

    for (const auto& uid : buffer.uids()) {
      for (std::size_t limit : {1u, 2u, 5u}) {
        for (const auto& filter : {any_reward(), reward_at_least(1.0), reward_below(1.0)}) {
          RngStream a(static_cast<std::uint64_t>(trial), "rt"), b(static_cast<std::uint64_t>(trial), "rt");
          const auto x = buffer.retrieve(uid, filter, limit, a);
          const auto y = loaded.retrieve(uid, filter, limit, b);
          REQUIRE(x.size() == y.size());
          for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(nlohmann::json(x[i]).dump() == nlohmann::json(y[i]).dump());
          }
        }
      }
    }
  }
}

TEST_CASE("read_jsonl names the corrupt line") {
  std::stringstream text;
  text << nlohmann::json(make_record("q1", 1.0)).dump() << "\n\n{not json\n";
  try {
    (void)SampleBuffer::read_jsonl(text);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("load of a missing file is an IoError") {
  CHECK_THROWS_AS(SampleBuffer::load("/nonexistent/buffer.jsonl"), IoError);
}

TEST_CASE("concurrent inserts and retrievals") {
  SampleBuffer buffer(BufferOptions{500, 0});
  std::atomic<bool> leaked{false};
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&buffer, &leaked, w] {
      for (int i = 0; i < 250; ++i) {
        const std::string uid = "q" + std::to_string((w + i) % 6);
        buffer.insert(make_record(uid, (i % 2) ? 1.0 : 0.0));
        RngStream rng(static_cast<std::uint64_t>(w), "mt", {static_cast<std::uint64_t>(i)});
        for (const auto& r : buffer.retrieve(uid, any_reward(), 3, rng)) {
          if (r.uid != uid) leaked = true;
        }
        (void)buffer.history_mean_reward(uid, 4);
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK_FALSE(leaked);
  CHECK(buffer.size() == 500);
  std::size_t total = 0;
  for (const auto& uid : buffer.uids()) total += buffer.count(uid);
  CHECK(total == 500);
}

TEST_CASE("copies are independent") {
  SampleBuffer a;
  a.insert(make_record("q1", 1.0));
  SampleBuffer b = a;
  b.insert(make_record("q1", 0.0));
  CHECK(a.size() == 1);
  CHECK(b.size() == 2);
}
