#include <cstdint>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "segan/rng.hpp"

using segan::Rng;

TEST_CASE("same seed reproduces the stream") {
  Rng a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u32() == b.next_u32());
}

TEST_CASE("different streams diverge") {
  Rng a(42, 1), b(42, 2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u32() == b.next_u32();
  CHECK(same < 5);
}

TEST_CASE("below stays in range and hits every value") {
  Rng r(1);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    int v = r.below(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 700);
}

TEST_CASE("uniform lies in the half-open unit interval") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng r(5);
  double sum = 0, sq = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    sum += v;
    sq += v * v;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("state round-trip resumes the exact stream") {
  Rng r(9, 4);
  for (int i = 0; i < 17; ++i) r.next_u32();
  auto s = r.state();
  std::vector<uint32_t> expect;
  for (int i = 0; i < 50; ++i) expect.push_back(r.next_u32());
  Rng q;
  q.set_state(s);
  for (int i = 0; i < 50; ++i) CHECK(q.next_u32() == expect[size_t(i)]);
}
