#include <gtest/gtest.h>

#include <numeric>

#include "fixtures.hpp"
#include "gfuzz/error.hpp"
#include "gfuzz/graphgen.hpp"
#include "gfuzz/mutation.hpp"
#include "gfuzz/operators.hpp"

using namespace gfuzz;

namespace {

// Assigned random graph over the default corpus; retries until it fits.
Graph random_graph(std::uint64_t seed, int n) {
  const auto& c = fixtures::default_corpus();
  std::vector<std::size_t> all(c.blocks.size());
  std::iota(all.begin(), all.end(), 0);
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = derive_seed(seed, attempt);
    GraphGenConfig cfg{s % 2 ? TopologyModel::kRN : TopologyModel::kWS, n, 2 + 2 * static_cast<int>(s % 3),
                       s % 2 ? 0.9 : 0.5, s};
    Rng rng(s);
    try {
      return assign_blocks(generate_topology(cfg), c, all, rng);
    } catch (const GenerationError&) {
    }
  }
}

// A graph is well formed when it is acyclic, every slot is filled, degrees
// sit in range and it still lowers to a structurally valid model.
void expect_well_formed(const Graph& g) {
  ASSERT_TRUE(is_acyclic(g));
  ASSERT_TRUE(degrees_conform(g));
  ModelSpec m = lower_to_model(expand_blocks(g));
  m.input_shapes.assign(m.placeholders().size(), Shape{1, 4, 4, 1});
  ASSERT_NO_THROW(validate_model_structure(m));
}

int subgraph_members(const Graph& g) {
  int n = 0;
  for (const auto& node : g.nodes)
    if (node.block && node.block->is_subgraph()) n += static_cast<int>(node.block->members.size());
  return n;
}

Graph with_subgraph(const std::string& name, int degree) {
  const auto& c = fixtures::default_corpus();
  Graph g;
  std::vector<int> inputs;
  for (int i = 0; i < degree; ++i) inputs.push_back(g.add_node(placeholder_block()));
  const int s = g.add_node(c.blocks[*c.find(name)]);
  for (int p : inputs) g.add_edge(p, s);
  return g;
}

constexpr int kRates[] = {1, 2, 3, 5};  // tenths

}  // namespace

TEST(Select, ForcedChoice) {
  MutationConfig cfg;
  cfg.enabled = {MutationKind::kTSM};
  Rng rng(1);
  const auto a = select_mutations(cfg, rng);
  ASSERT_EQ(a.mutations.size(), 1u);
  EXPECT_EQ(a.mutations[0].kind, MutationKind::kTSM);
}

TEST(Select, EverythingIsReachableAndOrdered) {
  MutationConfig cfg;
  Rng rng(2);
  std::map<MutationKind, int> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto a = select_mutations(cfg, rng);
    ASSERT_FALSE(a.mutations.empty());
    for (std::size_t j = 1; j < a.mutations.size(); ++j)
      ASSERT_LT(static_cast<int>(a.mutations[j - 1].kind), static_cast<int>(a.mutations[j].kind));
    for (const auto& m : a.mutations) {
      ++seen[m.kind];
      if (is_model_level(m.kind)) {
        ASSERT_TRUE(m.r == 0.0 || m.r == 0.1 || m.r == 0.2);
      }
    }
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Select, EmptyEnabledSetIsAConfigError) {
  MutationConfig cfg;
  cfg.enabled.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.r_choices = {0.5, -0.1};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Names, RoundTrip) {
  for (auto k : {MutationKind::kGEA, MutationKind::kGER, MutationKind::kBNA, MutationKind::kBNR, MutationKind::kTSM,
                 MutationKind::kPM})
    EXPECT_EQ(mutation_from_name(mutation_name(k)), k);
}

TEST(Gea, ZeroRateIsIdentity) {
  Graph g = random_graph(1, 8);
  const auto before = g.edges;
  Rng rng(1);
  EXPECT_EQ(gea(g, 0.0, rng).requested, 0);
  EXPECT_EQ(g.edges, before);
}

TEST(Gea, FiveNodesAtTwentyPercentAddsOne) {
  int checked = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    Graph g = random_graph(s, 5);
    if (g.node_count() != 5) continue;
    const auto before = g.edges.size();
    Rng rng(s);
    const auto st = gea(g, 0.2, rng);
    EXPECT_EQ(st.requested, 1);
    if (st.shortfall()) continue;
    EXPECT_EQ(g.edges.size(), before + 1);
    EXPECT_TRUE(topological_order(g).has_value());
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Gea, CeilingContractOverManyCases) {
  int exact = 0;
  for (std::uint64_t s = 0; s < 2400; ++s) {
    Graph g = random_graph(s, 2 + static_cast<int>(s % 20));
    const int tenths = kRates[s % 4];
    const int n = static_cast<int>(g.node_count());
    const int want = (n * tenths + 9) / 10;
    const auto before = g.edges.size();
    Rng rng(s);
    const auto st = gea(g, tenths / 10.0, rng);
    ASSERT_EQ(st.requested, want);
    ASSERT_EQ(g.edges.size(), before + static_cast<std::size_t>(st.applied));
    if (!st.shortfall()) {
      ASSERT_EQ(static_cast<int>(g.edges.size() - before), want);
      ++exact;
    }
    expect_well_formed(g);
  }
  EXPECT_GE(exact, 1000);
}

TEST(Ger, FloorContractOverManyCases) {
  int exact = 0;
  for (std::uint64_t s = 0; s < 2400; ++s) {
    Graph g = random_graph(s + 5000, 2 + static_cast<int>(s % 20));
    const int tenths = kRates[s % 4];
    const int n = static_cast<int>(g.node_count());
    const int want = n * tenths / 10;
    const auto before = g.edges.size();
    Rng rng(s);
    const auto st = ger(g, tenths / 10.0, rng);
    ASSERT_EQ(st.requested, want);
    ASSERT_EQ(before - g.edges.size(), static_cast<std::size_t>(st.applied));
    if (!st.shortfall()) {
      ASSERT_EQ(static_cast<int>(before - g.edges.size()), want);
      ++exact;
    }
    expect_well_formed(g);
  }
  EXPECT_GE(exact, 1000);
}

TEST(Ger, SmallCountsFloorToZero) {
  Graph g = random_graph(3, 5);
  Rng rng(3);
  const auto st = ger(g, 0.1, rng);
  EXPECT_EQ(st.requested, static_cast<int>(g.node_count()) / 10);
}

TEST(Ger, SkipsEdgesThatWouldStarveAnAdd) {
  // Const, Const → Add; all three → Concat. Only the Concat can give up an input.
  BlockCorpus c;
  Block cst = single_operator_block("Const");
  cst.in_degree = {0};
  cst.out_degree = {0, 1, 2, 3};
  Block add = single_operator_block("Add");
  add.in_degree = {2};
  add.out_degree = {0, 1};
  Block cat = single_operator_block("Concat");
  cat.in_degree = {2, 3};
  cat.out_degree = {0};
  Graph g;
  const int a = g.add_node(cst), b = g.add_node(cst), s = g.add_node(add), k = g.add_node(cat);
  g.add_edge(a, s);
  g.add_edge(b, s);
  g.add_edge(a, k);
  g.add_edge(b, k);
  g.add_edge(s, k);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Graph h = g;
    Rng rng(seed);
    const auto st = ger(h, 0.25, rng);
    ASSERT_EQ(st.requested, 1);
    ASSERT_EQ(st.applied, 1);
    EXPECT_EQ(h.in_degree(s), 2);
    EXPECT_EQ(h.in_degree(k), 2);
    EXPECT_TRUE(degrees_conform(h));
  }
}

TEST(Bna, NoSubgraphsIsIdentity) {
  Graph g = with_subgraph("Relu", 1);
  const auto before = g.nodes[1].block;
  Rng rng(1);
  EXPECT_EQ(bna(g, 1.0, rng).requested, 0);
  EXPECT_EQ(g.nodes[1].block, before);
}

TEST(Bna, FullRateAddsOneMember) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    Graph g = with_subgraph("SG3", 1);
    Rng rng(s);
    const auto st = bna(g, 1.0, rng);
    ASSERT_EQ(st.requested, 1);
    if (!st.applied) continue;
    EXPECT_EQ(subgraph_members(g), 4);
    expect_well_formed(g);
  }
}

TEST(Bna, DuplicationFrequencyMatchesRate) {
  int requested = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Graph g;
    for (int i = 0; i < 10; ++i) {
      Graph one = with_subgraph("SG2", 2);
      const int base = static_cast<int>(g.nodes.size());
      for (auto& n : one.nodes) g.add_node(n.block);
      for (auto& e : one.edges) g.add_edge(base + e.src, base + e.dst);
    }
    Rng rng(s);
    requested += bna(g, 0.2, rng).requested;
  }
  EXPECT_NEAR(requested / 1000.0, 0.2, 0.05);
}

TEST(Bnr, DeletingMulFromSubgraphTwo) {
  bool any = false;
  for (int degree : {1, 2, 3}) {
    Graph g = with_subgraph("SG2", degree);
    const int node = degree;
    if (!remove_member(g, node, 0)) continue;
    any = true;
    const Block& b = *g.nodes[static_cast<std::size_t>(node)].block;
    EXPECT_EQ(b.members, (std::vector<std::string>{"Add", "Relu"}));
    EXPECT_EQ(b.inner_edges, (std::vector<InnerEdge>{{0, 1}}));
    expect_well_formed(g);
  }
  EXPECT_TRUE(any);
}

TEST(Bnr, DeletingConvFromSubgraphOne) {
  Graph g = with_subgraph("SG1", 1);
  ASSERT_TRUE(remove_member(g, 1, 0));
  const Block& b = *g.nodes[1].block;
  EXPECT_EQ(b.members, (std::vector<std::string>{"Conv2d", "Conv2d", "Concat"}));
  EXPECT_EQ(b.inner_edges.size(), 2u);
  expect_well_formed(g);
}

TEST(Bnr, ZeroRateIsIdentity) {
  Graph g = with_subgraph("SG1", 2);
  const auto before = g.nodes[2].block;
  Rng rng(1);
  EXPECT_EQ(bnr(g, 0.0, rng).applied, 0);
  EXPECT_EQ(g.nodes[2].block, before);
}

TEST(Mutations, AllKeepGraphsWellFormed) {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Graph g = random_graph(s + 90000, 2 + static_cast<int>(s % 15));
    Rng rng(s);
    const int members_before = subgraph_members(g);
    switch (s % 4) {
      case 0: gea(g, 0.2, rng); break;
      case 1: ger(g, 0.2, rng); break;
      case 2: {
        const auto st = bna(g, 1.0, rng);
        ASSERT_EQ(subgraph_members(g), members_before + st.applied);
        break;
      }
      default: {
        const auto st = bnr(g, 1.0, rng);
        ASSERT_EQ(subgraph_members(g), members_before - st.applied);
      }
    }
    expect_well_formed(g);
  }
}

TEST(Tsm, SamplesStayInTheDomain) {
  const ShapeDomain d;
  auto in = [](const std::vector<std::int64_t>& v, std::int64_t x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  const Shape base{1, 8, 8, 3};
  int changed = 0;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Shape s = tsm(base, d, rng);
    ASSERT_EQ(s.size(), 4u);
    ASSERT_TRUE(s[0] == base[0] || in(d.n, s[0]));
    ASSERT_TRUE(s[1] == base[1] || in(d.h, s[1]));
    ASSERT_TRUE(s[2] == base[2] || in(d.w, s[2]));
    ASSERT_TRUE(s[3] == base[3] || in(d.c, s[3]));
    for (auto x : s) ASSERT_GT(x, 0);
    changed += s != base;
  }
  EXPECT_GT(changed, 500);
}

TEST(Tsm, SingletonDomainIsIdentity) {
  ShapeDomain d;
  d.n = {1};
  d.h = {8};
  d.w = {8};
  d.c = {3};
  Rng rng(4);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(tsm({1, 8, 8, 3}, d, rng), (Shape{1, 8, 8, 3}));
  EXPECT_THROW(tsm({8, 8}, d, rng), ValidationError);
}

TEST(Pm, ResampledParamsConformToTheSchema) {
  const ParamSchema schema = default_schema("Conv2d");
  Rng rng(5);
  std::set<std::int64_t> strides;
  for (int i = 0; i < 1000; ++i) {
    const ParamMap p = pm({}, schema, rng);
    for (const auto& spec : schema) {
      if (spec.domain.kind == ParamDomain::Kind::kShapeDependent) {
        ASSERT_FALSE(p.count(spec.name));
        continue;
      }
      ASSERT_TRUE(spec.domain.contains(p.at(spec.name))) << spec.name;
    }
    const auto d = param_int(p, "dilation_h", 0);
    ASSERT_TRUE(d >= 1 && d <= 3);
    EXPECT_EQ(param_str(p, "padding", ""), "SAME");
    strides.insert(param_int(p, "stride_h", 0));
  }
  EXPECT_EQ(strides, (std::set<std::int64_t>{1, 2}));
}

TEST(Pm, DefaultsTakeTheFirstValue) {
  const ParamMap p = default_params(default_schema("DepthwiseConv2d"));
  EXPECT_EQ(param_int(p, "depth_multiplier", 0), 1);
  EXPECT_EQ(param_int(p, "kernel_h", 0), 1);
  EXPECT_EQ(param_str(p, "padding", ""), "SAME");
  EXPECT_FALSE(p.count("pad_h"));
}

TEST(Mutations, DeterministicGivenSeed) {
  Graph a = random_graph(11, 12), b = random_graph(11, 12);
  Rng ra(9), rb(9);
  gea(a, 0.2, ra);
  gea(b, 0.2, rb);
  ger(a, 0.2, ra);
  ger(b, 0.2, rb);
  EXPECT_EQ(a.edges, b.edges);
}
