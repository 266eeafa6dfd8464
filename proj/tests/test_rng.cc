#include <doctest.h>

#include <cmath>
#include <set>

#include "sasv/rng.h"

using namespace sasv;

TEST_SUITE("rng") {

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.gaussian() == b.gaussian());
    CHECK(a.integer(1000) == b.integer(1000));
  }
}

TEST_CASE("derive_seed separates streams by tag and index") {
  std::set<uint64_t> seen;
  for (uint64_t i = 0; i < 100; ++i) {
    seen.insert(derive_seed(7, "a", i));
    seen.insert(derive_seed(7, "b", i));
  }
  CHECK(seen.size() == 200);
}

TEST_CASE("uniform stays in [0,1) and gaussian has sane moments") {
  Rng rng(3);
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double g = rng.gaussian();
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(5);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7};
  auto orig = v;
  rng.shuffle(v);
  std::sort(v.begin(), v.end());
  CHECK(v == orig);
}

}  // TEST_SUITE
