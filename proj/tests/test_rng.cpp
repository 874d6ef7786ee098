#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "lrsm/rng.hpp"

using namespace lrsm;

TEST_CASE("same seed reproduces the same sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("different seeds and different streams disagree") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);

  Rng s0(7, 0), s1(7, 1);
  same = 0;
  for (int i = 0; i < 64; ++i) same += s0.next_u64() == s1.next_u64();
  CHECK(same == 0);

  // stream (seed, i) is itself deterministic
  Rng x(7, 3), y(7, 3);
  for (int i = 0; i < 16; ++i) CHECK(x.next_u64() == y.next_u64());
}

TEST_CASE("uniform stays in [0,1) and uniform_pos in (0,1]") {
  Rng r(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = r.uniform_pos();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normal moments look standard normal") {
  Rng r(2024);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK(std::abs(s3 / n) < 0.05);
  CHECK(std::abs(s4 / n - 3.0) < 0.1);
}

TEST_CASE("normal draw order does not depend on batching") {
  Rng a(5), b(5);
  Vector batched = a.normal_vector(7);
  Vector loose(7);
  for (Index i = 0; i < 7; ++i) loose[i] = b.normal();
  for (Index i = 0; i < 7; ++i) CHECK(batched[i] == loose[i]);
}

TEST_CASE("mix is a bijection on a sample of inputs") {
  std::set<std::uint64_t> outs;
  for (std::uint64_t i = 0; i < 4096; ++i) outs.insert(Rng::mix(i));
  CHECK(outs.size() == 4096);
}
