#include <doctest.h>

#include <set>

#include "r3/rng.hpp"

using r3::RngStream;

TEST_CASE("streams with the same key agree") {
  RngStream a(7, "rollout", {1, 2, 3});
  RngStream b(7, "rollout", {1, 2, 3});
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("streams differ by seed, name and indices") {
  const auto first = [](RngStream s) { return s(); };
  std::set<std::uint64_t> seen{first(RngStream(7, "rollout", {1, 2})), first(RngStream(8, "rollout", {1, 2})),
                               first(RngStream(7, "replay", {1, 2})), first(RngStream(7, "rollout", {2, 1})),
                               first(RngStream(7, "rollout", {1, 2, 0}))};
  CHECK(seen.size() == 5);
}

TEST_CASE("uniform and index stay in range") {
  RngStream rng(1, "range");
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.index(7) < 7);
  }
  CHECK_THROWS(rng.index(0));
}

TEST_CASE("index is roughly uniform") {
  RngStream rng(3, "hist");
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 40000; ++i) ++counts[rng.index(4)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
}

TEST_CASE("stable_hash is FNV-1a") {
  CHECK(r3::stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(r3::stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}
