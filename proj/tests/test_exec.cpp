#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "gfuzz/engine.hpp"
#include "gfuzz/error.hpp"

using namespace gfuzz;
using fixtures::ModelBuilder;

namespace {

Tensor f32(Shape shape, std::vector<float> values) {
  Tensor t = Tensor::zeros(std::move(shape), DType::kF32);
  t.f = std::move(values);
  return t;
}

BugMask only(Bug b) {
  BugMask m;
  m.set(static_cast<std::size_t>(b));
  return m;
}

TrialOutcome trial(const ModelSpec& m, BugMask bugs, bool fuse = true) {
  TrialConfig cfg;
  cfg.bugs = bugs;
  cfg.fuse = fuse;
  return run_trial(m, cfg);
}

// Hand-built witness for each seeded defect.
ModelSpec witness(Bug b) {
  ModelBuilder mb;
  const int p = mb.input({1, 8, 8, 4});
  switch (b) {
    case Bug::kPoolPadCorner: mb.add("AvgPool", fixtures::pool_params(3, 1, 1), {p}); break;
    case Bug::kConcatDrop: mb.add("Concat", {{"axis", std::int64_t{3}}}, {p, p, p}); break;
    case Bug::kCastSat: mb.add("Cast", {{"to", std::string("i8")}}, {p}); break;
    case Bug::kFusedReluSkip: {
      const int c = mb.add("Conv2d", fixtures::conv_params(4, 1, 1, 0), {p});
      const int bias = mb.add("BiasAdd", {}, {c});
      mb.add("Relu", {}, {bias});
      break;
    }
    case Bug::kStride2Offset: mb.add("Conv2d", fixtures::conv_params(4, 1, 2, 0), {p}); break;
    case Bug::kRealDivZeroNan: {
      const int zero = mb.add("Sub", {}, {p, p});
      mb.add("RealDiv", {}, {p, zero});
      break;
    }
    case Bug::kMaxPoolPadZero: {
      const int s = mb.add("Sigmoid", {}, {p});
      const int zero = mb.add("Sub", {}, {p, p});
      const int neg = mb.add("Sub", {}, {zero, s});
      mb.add("MaxPool", fixtures::pool_params(3, 1, 1), {neg});
      break;
    }
    case Bug::kDepthwiseMult: mb.add("DepthwiseConv2d", fixtures::depthwise_params(2, 1, 0), {p}); break;
    case Bug::kAddFanoutAbort: {
      const int a = mb.add("Add", {}, {p, p});
      mb.add("Relu", {}, {a});
      mb.add("Tanh", {}, {a});
      break;
    }
    case Bug::kConvertDilatedDepthwise: mb.add("DepthwiseConv2d", fixtures::depthwise_params(1, 3, 2, 2), {p}); break;
  }
  return mb.build(11);
}

}  // namespace

TEST(Reference, ReluDefinition) {
  ModelBuilder b;
  const int p = b.input({1, 1, 1, 3});
  b.add("Relu", {}, {p});
  const auto r = run_reference(b.build(), {f32({1, 1, 1, 3}, {-1.0f, 0.0f, 2.0f})});
  ASSERT_FALSE(r.failure);
  EXPECT_EQ(r.outputs[0].f, (std::vector<float>{0.0f, 0.0f, 2.0f}));
}

TEST(Reference, DivisionByZeroIsIeeeNotFault) {
  ModelBuilder b;
  const int x = b.input({1, 1, 1, 2});
  const int y = b.input({1, 1, 1, 2});
  b.add("RealDiv", {}, {x, y});
  const auto r = run_reference(b.build(), {f32({1, 1, 1, 2}, {2.0f, -3.0f}), f32({1, 1, 1, 2}, {0.0f, 0.0f})});
  ASSERT_FALSE(r.failure);
  EXPECT_EQ(r.outputs[0].f[0], std::numeric_limits<float>::infinity());
  EXPECT_EQ(r.outputs[0].f[1], -std::numeric_limits<float>::infinity());
}

TEST(Reference, ConvMatchesNaiveOracle) {
  ModelBuilder b;
  const int p = b.input({1, 5, 6, 3});
  b.add("Conv2d", fixtures::conv_params(2, 3, 2, 1), {p});
  const ModelSpec m = b.build(99);
  const auto inputs = synthesize_inputs(m);
  const auto r = run_reference(m, inputs);
  ASSERT_FALSE(r.failure);
  const auto w = synth_values(99, 1, WeightTag::kFilter, 3 * 3 * 3 * 2);
  const Tensor& x = inputs[0];
  const Tensor& y = r.outputs[0];
  ASSERT_EQ(y.shape, (Shape{1, 3, 3, 2}));
  for (int oh = 0; oh < 3; ++oh)
    for (int ow = 0; ow < 3; ++ow)
      for (int o = 0; o < 2; ++o) {
        double acc = 0;
        for (int kh = 0; kh < 3; ++kh)
          for (int kw = 0; kw < 3; ++kw)
            for (int c = 0; c < 3; ++c) {
              const int ih = oh * 2 - 1 + kh, iw = ow * 2 - 1 + kw;
              if (ih < 0 || ih >= 5 || iw < 0 || iw >= 6) continue;
              acc += static_cast<double>(x.f[static_cast<std::size_t>((ih * 6 + iw) * 3 + c)]) *
                     w[static_cast<std::size_t>(((kh * 3 + kw) * 3 + c) * 2 + o)];
            }
        EXPECT_NEAR(y.f[static_cast<std::size_t>((oh * 3 + ow) * 2 + o)], acc, 1e-5);
      }
}

TEST(Reference, IdentityTransposeAndReshapeKeepData) {
  ModelBuilder b;
  const int p = b.input({1, 2, 3, 4});
  const int t = b.add("Transpose", {{"perm", std::vector<std::int64_t>{0, 1, 2, 3}}}, {p});
  b.add("Reshape", {{"shape", std::vector<std::int64_t>{1, 4, 3, 2}}}, {t});
  const ModelSpec m = b.build();
  const auto in = synthesize_inputs(m);
  const auto r = run_reference(m, in);
  ASSERT_FALSE(r.failure);
  EXPECT_EQ(r.outputs[0].f, in[0].f);
}

TEST(Reference, InputMismatchIsFault) {
  ModelBuilder b;
  const int p = b.input({1, 2, 2, 1});
  b.add("Relu", {}, {p});
  const auto r = run_reference(b.build(), {f32({1, 1, 1, 1}, {1.0f})});
  ASSERT_TRUE(r.failure);
  EXPECT_EQ(r.failure->stage, Stage::kInfer);
}

TEST(Tensor, TnsRoundTrip) {
  Tensor a = f32({2, 3}, {1.5f, -0.0f, std::numeric_limits<float>::quiet_NaN(), 4, 5, -6});
  Tensor b = Tensor::zeros({4}, DType::kI8);
  b.i = {-128, 0, 5, 127};
  Tensor c = Tensor::zeros({1, 2}, DType::kI32);
  c.i = {-7, 1 << 20};
  for (const Tensor& t : {a, b, c}) {
    const std::string bytes = encode_tns(t);
    EXPECT_EQ(bytes.substr(0, 4), "GFTZ");
    EXPECT_TRUE(bit_equal(decode_tns(bytes), t));
    EXPECT_EQ(encode_tns(decode_tns(bytes)), bytes);
  }
  EXPECT_EQ(encode_tns(b).size(), 4u + 3 + 4 + 4);
  EXPECT_THROW(decode_tns("GFTX\x01"), ParseError);
  EXPECT_THROW(decode_tns(encode_tns(a).substr(0, 20)), ParseError);
}

TEST(Tensor, SynthValuesInUnitRangeAndDeterministic) {
  const auto v = synth_values(5, 3, WeightTag::kFilter, 10000);
  for (float x : v) {
    ASSERT_GE(x, -1.0f);
    ASSERT_LT(x, 1.0f);
  }
  EXPECT_EQ(v, synth_values(5, 3, WeightTag::kFilter, 10000));
  EXPECT_NE(v, synth_values(5, 3, WeightTag::kBias, 10000));
}

TEST(Compare, SelfComparisonPasses) {
  const Tensor t = f32({1, 4}, {1, 2, 3, 4});
  const auto r = compare({t}, {t});
  EXPECT_DOUBLE_EQ(r.re, 1.0);
  EXPECT_TRUE(r.pass());
}

TEST(Compare, BoundaryAtOnePerThousand) {
  std::vector<float> a(1000, 1.0f);
  auto b = a;
  b[17] = 1.1f;
  const auto r = compare({f32({1000}, a)}, {f32({1000}, b)});
  EXPECT_DOUBLE_EQ(r.ratios[0], 0.999);
  EXPECT_TRUE(r.pass());
  b[18] = 1.1f;
  EXPECT_FALSE(compare({f32({1000}, a)}, {f32({1000}, b)}).pass());
}

TEST(Compare, SpecialValues) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(element_agrees(nan, 1.0));
  EXPECT_FALSE(element_agrees(1.0, nan));
  EXPECT_TRUE(element_agrees(nan, nan));
  EXPECT_TRUE(element_agrees(inf, inf));
  EXPECT_FALSE(element_agrees(inf, -inf));
  EXPECT_FALSE(element_agrees(inf, 1e30));
  EXPECT_TRUE(element_agrees(0.0, 5e-10));  // below the epsilon floor
  EXPECT_TRUE(element_agrees(1000.0, 1000.9));
  EXPECT_FALSE(element_agrees(1000.0, 1001.1));
}

TEST(Compare, ShapeAndArityMismatch) {
  const Tensor a = f32({1, 2}, {1, 2});
  const Tensor b = f32({2, 1}, {1, 2});
  EXPECT_DOUBLE_EQ(compare({a}, {b}).re, 0.0);
  EXPECT_DOUBLE_EQ(compare({a, a}, {a}).re, 0.0);
}

TEST(Compare, SymmetricOnFiniteValues) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> a(50), b(50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<float>(rng.uniform01() * 2 - 1);
      b[i] = rng.bernoulli(0.9) ? a[i] : static_cast<float>(rng.uniform01() * 2 - 1);
    }
    ASSERT_EQ(compare({f32({50}, a)}, {f32({50}, b)}).pass(), compare({f32({50}, b)}, {f32({50}, a)}).pass());
  }
}

TEST(Optimized, AgreesBitExactlyOnCleanRuns) {
  for (std::uint64_t seed = 0; seed < 80; ++seed) {
    const ModelSpec m = fixtures::campaign_model(seed, 1, 12);
    const auto in = synthesize_inputs(m);
    const auto ref = run_reference(m, in);
    ASSERT_FALSE(ref.failure) << ref.failure->message;
    const auto fused = run_optimized(m, in, {});
    OptimizedOptions plain;
    plain.fuse = false;
    const auto unfused = run_optimized(m, in, plain);
    ASSERT_FALSE(fused.failure);
    ASSERT_EQ(ref.outputs.size(), fused.outputs.size());
    for (std::size_t i = 0; i < ref.outputs.size(); ++i) {
      ASSERT_TRUE(bit_equal(ref.outputs[i], fused.outputs[i])) << "seed " << seed;
      ASSERT_TRUE(bit_equal(fused.outputs[i], unfused.outputs[i])) << "seed " << seed;
    }
  }
}

TEST(Optimized, TwoMulsFeedingOneAdd) {
  // Both Muls have the Add as sole consumer; only one of them may fuse.
  ModelBuilder b;
  const int x = b.input({1, 4, 4, 2});
  const int m1 = b.add("Mul", {}, {x, x});
  const int m2 = b.add("Mul", {}, {x, x});
  b.add("Add", {}, {m2, m1});
  const ModelSpec m = b.build(3);
  const auto in = synthesize_inputs(m);
  const auto ref = run_reference(m, in);
  OptimizedOptions o;
  o.keep_taps = true;
  const auto opt = run_optimized(m, in, o);
  ASSERT_FALSE(opt.failure);
  EXPECT_TRUE(bit_equal(ref.outputs[0], opt.outputs[0]));
}

TEST(Optimized, Deterministic) {
  const ModelSpec m = fixtures::campaign_model(42, 5, 10);
  const auto in = synthesize_inputs(m);
  OptimizedOptions o;
  o.bugs.set();
  const auto a = run_optimized(m, in, o);
  const auto b = run_optimized(m, in, o);
  ASSERT_EQ(a.outputs.size(), b.outputs.size());
  for (std::size_t i = 0; i < a.outputs.size(); ++i) EXPECT_TRUE(bit_equal(a.outputs[i], b.outputs[i]));
  EXPECT_EQ(a.bug_hits, b.bug_hits);
}

TEST(Optimized, TapsOnlyAtGroupEnds) {
  const ModelSpec m = witness(Bug::kFusedReluSkip);
  OptimizedOptions o;
  o.keep_taps = true;
  const auto r = run_optimized(m, synthesize_inputs(m), o);
  EXPECT_EQ(r.taps.count(1), 0u);
  EXPECT_EQ(r.taps.count(2), 0u);
  EXPECT_EQ(r.taps.count(3), 1u);
}

class SeededBug : public ::testing::TestWithParam<int> {};

TEST_P(SeededBug, WitnessIsCleanWithoutTheDefect) {
  const Bug b = static_cast<Bug>(GetParam());
  const auto o = trial(witness(b), {});
  EXPECT_EQ(o.status, Status::kDCP) << bug_name(b) << " " << o.dedup_key;
  EXPECT_DOUBLE_EQ(o.re, 1.0);
}

TEST_P(SeededBug, WitnessTriggersTheDefect) {
  const Bug b = static_cast<Bug>(GetParam());
  const auto o = trial(witness(b), only(b));
  EXPECT_NE(o.status, Status::kDCP) << bug_name(b);
  EXPECT_EQ(o.culprits, std::set<Bug>{b}) << bug_name(b);
  if (b == Bug::kConvertDilatedDepthwise) {
    EXPECT_EQ(o.status, Status::kMCF);
    EXPECT_EQ(o.dedup_key, "MCF|convert|108|DepthwiseConv2d");
    EXPECT_NE(o.failure->message.find("writeFb.cpp:108"), std::string::npos);
  } else if (b == Bug::kAddFanoutAbort) {
    EXPECT_EQ(o.status, Status::kIF);
    EXPECT_EQ(o.dedup_key, "IF|abort|134|Add");
  } else {
    EXPECT_EQ(o.status, Status::kDCF);
  }
}

TEST_P(SeededBug, OtherDefectsLeaveTheWitnessAlone) {
  const Bug b = static_cast<Bug>(GetParam());
  BugMask rest;
  rest.set();
  rest.reset(static_cast<std::size_t>(b));
  const auto o = trial(witness(b), rest);
  EXPECT_EQ(o.culprits.count(b), 0u);
}

INSTANTIATE_TEST_SUITE_P(All, SeededBug, ::testing::Range(0, kBugCount));

TEST(SeededBugDetail, ConcatDropShareMatchesDroppedFraction) {
  const auto o = trial(witness(Bug::kConcatDrop), only(Bug::kConcatDrop));
  ASSERT_EQ(o.status, Status::kDCF);
  EXPECT_EQ(o.dedup_key, "DCF|Concat[multi-input]");
  EXPECT_NEAR(o.re, 2.0 / 3.0, 0.02);
}

TEST(SeededBugDetail, CastOfUnitValuesToI8) {
  const auto o = trial(witness(Bug::kCastSat), only(Bug::kCastSat));
  EXPECT_EQ(o.dedup_key, "DCF|Cast[f32->i8]");
}

TEST(BugMask, ParseAndPrint) {
  EXPECT_TRUE(parse_bug_mask("").none());
  EXPECT_TRUE(parse_bug_mask("none").none());
  EXPECT_TRUE(parse_bug_mask("all").all());
  const auto m = parse_bug_mask("cast-sat,concat-drop");
  EXPECT_EQ(m.count(), 2u);
  EXPECT_EQ(bug_mask_string(m), "concat-drop,cast-sat");
  EXPECT_EQ(parse_bug_mask(bug_mask_string(m)), m);
  EXPECT_THROW(parse_bug_mask("cast-sat,bogus"), ConfigError);
}

TEST(Registry, SameDefectCollapses) {
  ExceptionRegistry reg;
  const auto o = trial(witness(Bug::kConcatDrop), only(Bug::kConcatDrop));
  for (int i = 0; i < 50; ++i) EXPECT_EQ(reg.record(o, i), i == 0);
  EXPECT_EQ(reg.entries().size(), 1u);
  EXPECT_EQ(reg.totals(Status::kDCF).dedup, 1);
  EXPECT_EQ(reg.totals(Status::kDCF).raw, 50);
  EXPECT_EQ(reg.entries().begin()->second.first_model, 0);
  EXPECT_DOUBLE_EQ(*reg.dedup_share(Bug::kConcatDrop), 1.0);
}

TEST(Registry, DifferentOperatorsAreDistinct) {
  ExceptionRegistry reg;
  TrialOutcome a;
  a.status = Status::kMCF;
  a.dedup_key = "MCF|convert|108|DepthwiseConv2d";
  TrialOutcome b = a;
  b.dedup_key = "MCF|convert|108|Conv2d";
  reg.record(a, 0);
  reg.record(b, 1);
  EXPECT_EQ(reg.totals(Status::kMCF).dedup, 2);
}

TEST(Registry, PassesAreIgnored) {
  ExceptionRegistry reg;
  EXPECT_FALSE(reg.record(TrialOutcome{}, 0));
  EXPECT_TRUE(reg.entries().empty());
  EXPECT_EQ(reg.totals(Status::kDCF).raw, 0);
  EXPECT_NE(reg.table().find("Status"), std::string::npos);
}
