#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "magcn/errors.hpp"
#include "magcn/params.hpp"

using namespace magcn;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs |= x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndIndexStayInRange) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-0.5, 0.25);
    EXPECT_GE(u, -0.5);
    EXPECT_LT(u, 0.25);
    EXPECT_LT(rng.index(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(9);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(ParamStore, RegistersNamedLeaves) {
  ParamStore store;
  Rng rng(1);
  const Tensor w = store.add_xavier("w", 4, 6, rng);
  const Tensor b = store.add_constant("b", {6}, 0.5);
  EXPECT_TRUE(w.requires_grad());
  EXPECT_EQ(w.shape(), (Shape{4, 6}));
  const double bound = std::sqrt(6.0 / 10.0);
  for (double v : w.data()) EXPECT_LE(std::fabs(v), bound);
  for (double v : b.data()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.parameter_count(), 30u);
  EXPECT_TRUE(store.contains("w"));
  EXPECT_EQ(store.get("b").id(), b.id());
  EXPECT_THROW(store.add_constant("w", {1}, 0.0), ContractError);
}

TEST(ParamStore, SnapshotRestoreRoundTrip) {
  ParamStore store;
  Rng rng(2);
  Tensor w = store.add_uniform("w", {2, 3}, 1.0, rng);
  const auto snap = store.snapshot();
  w.mutable_data()[0] = 99.0;
  store.restore(snap);
  EXPECT_EQ(store.snapshot(), snap);

  auto wrong_shape = snap;
  wrong_shape[0].shape = {3, 2};
  EXPECT_THROW(store.restore(wrong_shape), DimensionError);
  auto wrong_name = snap;
  wrong_name[0].name = "nope";
  EXPECT_THROW(store.restore(wrong_name), ValidationError);
}

TEST(ParamStore, ZeroGradClearsEveryLeaf) {
  ParamStore store;
  Tensor w = store.add_constant("w", {3}, 1.0);
  backward(sum(mul(w, w)));
  EXPECT_EQ(w.grad()[0], 2.0);
  store.zero_grad();
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}
