#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "coverage_oracle.hpp"
#include "fixtures.hpp"
#include "gfuzz/coverage.hpp"
#include "gfuzz/error.hpp"

using namespace gfuzz;
using fixtures::ModelBuilder;
using fixtures::brute_olc;
using fixtures::recount;

namespace {

CoverageState fixture_state() {
  CoverageConfig cfg;
  cfg.n_maxspc = 10;
  CoverageState s(fixtures::three_op_corpus(), cfg);
  for (const auto& m : fixtures::three_model_fixture()) s.observe(m);
  return s;
}

std::vector<ModelSpec> random_models(std::uint64_t seed, int count) {
  std::vector<ModelSpec> out;
  for (int i = 0; i < count; ++i)
    out.push_back(fixtures::campaign_model(derive_seed(seed, static_cast<std::uint64_t>(i)), 1, 6));
  return out;
}

}  // namespace

TEST(Coverage, WorkedExampleOperatorRows) {
  const auto s = fixture_state();
  EXPECT_NEAR(100 * s.olc_op("Conv2d"), 64.0, 0.05);
  EXPECT_NEAR(100 * s.olc_op("Relu"), 55.3, 0.05);
  EXPECT_NEAR(100 * s.olc_op("Add"), 66.0, 0.05);
  const auto conv = s.op_metrics("Conv2d");
  EXPECT_DOUBLE_EQ(conv.idc, 1.0);
  EXPECT_NEAR(conv.odc, 2.0 / 3, 1e-12);
  EXPECT_NEAR(conv.sec, 1.0 / 3, 1e-12);
  EXPECT_NEAR(conv.spc, 0.2, 1e-12);
  EXPECT_NEAR(s.op_metrics("Add").spc, 0.3, 1e-12);
}

TEST(Coverage, WorkedExampleSetRow) {
  const auto r = fixture_state().set_metrics();
  EXPECT_NEAR(100 * r.otc, 100.0, 0.05);
  EXPECT_NEAR(100 * r.idc, 100.0, 0.05);
  EXPECT_NEAR(100 * r.odc, 55.6, 0.05);
  EXPECT_NEAR(100 * r.sec, 33.3, 0.05);
  EXPECT_NEAR(100 * r.spc, 20.0, 0.05);
  EXPECT_NEAR(100 * r.olc, 61.8, 0.05);
}

TEST(Coverage, EmptyStateIsZero) {
  CoverageState s(fixtures::three_op_corpus(), {});
  EXPECT_DOUBLE_EQ(s.olc(), 0.0);
  for (const auto& op : s.operator_types()) EXPECT_DOUBLE_EQ(s.olc_op(op), 0.0);
}

TEST(Coverage, ForeignOperatorsGoToTheirOwnBucket) {
  CoverageState s(fixtures::three_op_corpus(), {});
  ModelBuilder b;
  const int p = b.input({1, 4, 4, 2});
  b.add("Sigmoid", {}, {p});
  s.observe(b.build());
  EXPECT_DOUBLE_EQ(s.olc(), 0.0);
  EXPECT_EQ(s.foreign().count("Sigmoid"), 1u);
  EXPECT_EQ(s.foreign().count("Placeholder"), 1u);
}

TEST(Coverage, OutOfRangeDegreesDoNotCount) {
  CoverageState s(fixtures::three_op_corpus(), {});
  ModelBuilder b;
  const int p = b.input({1, 4, 4, 2});
  const int r = b.add("Relu", {}, {p});
  for (int i = 0; i < 3; ++i) b.add("Relu", {}, {r});
  s.observe(b.build());
  // Relu out-degrees seen: 3 (outside {0,1,2}) and 0.
  EXPECT_NEAR(s.op_metrics("Relu").odc, 1.0 / 3, 1e-12);
}

TEST(Coverage, SpVectorSkipsPlaceholderIndex) {
  ModelNode n{0, "Placeholder", {{"index", std::int64_t{3}}}, {}};
  EXPECT_EQ(sp_vector(n, {}), "|");
  ModelNode c{1, "Cast", {{"to", std::string("i8")}}, {{0, 0}}};
  EXPECT_EQ(sp_vector(c, {"[1,2,2,1]:f32"}), "[1,2,2,1]:f32|to=i8");
}

TEST(Coverage, ConfigValidation) {
  CoverageConfig c;
  c.n_maxspc = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.weights_op = {0, 0, 0, 0, 0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.weights_set[2] = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Coverage, GateModes) {
  const auto models = fixtures::three_model_fixture();
  CoverageConfig cfg;
  cfg.n_maxspc = 10;
  CoverageState s(fixtures::three_op_corpus(), cfg);
  EXPECT_TRUE(s.is_new_coverage({models[0]}));
  s.observe(models[0]);
  EXPECT_FALSE(s.is_new_coverage({models[0]}));
  cfg.gate = CoverageGate::kSetOnly;
  CoverageState set_only(fixtures::three_op_corpus(), cfg);
  EXPECT_TRUE(set_only.is_new_coverage({models[2]}));
}

TEST(CoverageProperty, MonotoneUnderObservation) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    CoverageState s(fixtures::default_corpus(), {});
    for (const auto& m : random_models(seed, 10)) {
      const auto before = s;
      s.observe(m);
      ASSERT_GE(s.olc() + 1e-12, before.olc());
      for (const auto& op : s.operator_types()) ASSERT_GE(s.olc_op(op) + 1e-12, before.olc_op(op));
    }
  }
}

TEST(CoverageProperty, PermutationInvariant) {
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    auto models = random_models(seed, 6);
    CoverageState a(fixtures::default_corpus(), {});
    for (const auto& m : models) a.observe(m);
    Rng rng(seed);
    std::shuffle(models.begin(), models.end(), std::mt19937_64(rng.next_u64()));
    CoverageState b(fixtures::default_corpus(), {});
    for (const auto& m : models) b.observe(m);
    ASSERT_TRUE(a == b);
    ASSERT_DOUBLE_EQ(a.olc(), b.olc());
  }
}

TEST(CoverageProperty, MergeIsAssociativeAndCommutative) {
  for (std::uint64_t seed = 200; seed < 260; ++seed) {
    const auto models = random_models(seed, 6);
    CoverageState x(fixtures::default_corpus(), {}), y = x, z = x, all = x;
    for (std::size_t i = 0; i < models.size(); ++i) {
      (i % 3 == 0 ? x : i % 3 == 1 ? y : z).observe(models[i]);
      all.observe(models[i]);
    }
    auto xy = x;
    xy.merge(y);
    auto yx = y;
    yx.merge(x);
    ASSERT_TRUE(xy == yx);
    auto left = xy;
    left.merge(z);
    auto yz = y;
    yz.merge(z);
    auto right = x;
    right.merge(yz);
    ASSERT_TRUE(left == right);
    ASSERT_TRUE(left == all);
  }
}

TEST(CoverageProperty, MatchesBruteForceRecount) {
  for (std::uint64_t seed = 300; seed < 400; ++seed) {
    const auto models = random_models(seed, 1 + static_cast<int>(seed % 5));
    CoverageState s(fixtures::default_corpus(), {});
    for (const auto& m : models) s.observe(m);
    const auto r = recount(models);
    for (const auto& op : s.operator_types()) ASSERT_NEAR(s.olc_op(op), brute_olc(r, s, op), 1e-12) << op;
  }
}

TEST(Coverage, MergeRejectsDifferentCorpora) {
  CoverageState a(fixtures::three_op_corpus(), {});
  CoverageState b(fixtures::default_corpus(), {});
  EXPECT_THROW(a.merge(b), ValidationError);
}
