#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "../src/rng.hpp"

using namespace rankvocab;

TEST_CASE("identical keys replay identical sequences") {
  CounterRng a = CounterRng::keyed(42, {streams::kDropout, 3, 7});
  CounterRng b = CounterRng::keyed(42, {streams::kDropout, 3, 7});
  for (int i = 0; i < 100; i++) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different stream ids decorrelate") {
  CounterRng a = CounterRng::keyed(42, {streams::kShuffle, 0});
  CounterRng b = CounterRng::keyed(42, {streams::kShuffle, 1});
  CounterRng c = CounterRng::keyed(43, {streams::kShuffle, 0});
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 64; i++) {
    uint64_t va = a.next_u64();
    if (va == b.next_u64()) same_ab++;
    if (va == c.next_u64()) same_ac++;
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("doubles live in the half-open unit interval") {
  CounterRng rng = CounterRng::keyed(7, {streams::kSynth, 0});
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; i++) {
    double v = rng.next_double();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(rng.uniform(-2, -1) >= -2);
  CHECK(rng.uniform(-2, -1) < -1);
}

TEST_CASE("below stays in range and covers values") {
  CounterRng rng = CounterRng::keyed(7, {streams::kSynth, 1});
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; i++) {
    uint64_t v = rng.below(10);
    REQUIRE(v < 10);
    seen.insert(v);
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v1 = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  std::vector<int> orig = v1;
  CounterRng r1 = CounterRng::keyed(5, {streams::kShuffle, 2});
  CounterRng r2 = CounterRng::keyed(5, {streams::kShuffle, 2});
  shuffle_in_place(v1, r1);
  shuffle_in_place(v2, r2);
  CHECK(v1 == v2);
  std::sort(v2.begin(), v2.end());
  CHECK(v2 == orig);
}
