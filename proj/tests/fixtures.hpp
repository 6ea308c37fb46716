#pragma once

// Shared builders for unit and acceptance tests.

#include <string>
#include <vector>

#include "gfuzz/error.hpp"
#include "gfuzz/harness.hpp"
#include "gfuzz/io.hpp"
#include "gfuzz/operators.hpp"

namespace fixtures {

using namespace gfuzz;

inline std::string source_path(const std::string& rel) { return std::string(GFUZZ_SOURCE_DIR) + "/" + rel; }

inline const BlockCorpus& default_corpus() {
  static const BlockCorpus c = load_corpus(source_path("corpus/default.json"));
  return c;
}

// Builds a ModelSpec node by node; ids follow insertion order.
class ModelBuilder {
 public:
  int input(Shape shape) {
    const int idx = static_cast<int>(m_.input_shapes.size());
    m_.input_shapes.push_back(std::move(shape));
    return add("Placeholder", {{"index", std::int64_t{idx}}}, {});
  }
  int add(const std::string& op, ParamMap params, const std::vector<int>& inputs) {
    ModelNode n;
    n.id = static_cast<int>(m_.nodes.size());
    n.op = op;
    n.params = std::move(params);
    for (int i : inputs) n.inputs.push_back({i, 0});
    m_.nodes.push_back(std::move(n));
    return m_.nodes.back().id;
  }
  ModelSpec build(std::uint64_t seed = 7) {
    m_.weights_seed = seed;
    return m_;
  }

 private:
  ModelSpec m_;
};

inline ParamMap conv_params(std::int64_t filters, std::int64_t k, std::int64_t stride, std::int64_t pad,
                            std::int64_t dilation = 1) {
  return {{"filters", filters}, {"kernel_h", k}, {"kernel_w", k}, {"stride_h", stride}, {"stride_w", stride},
          {"dilation_h", dilation}, {"dilation_w", dilation}, {"pad_h", pad}, {"pad_w", pad},
          {"padding", std::string("SAME")}};
}

inline ParamMap depthwise_params(std::int64_t mult, std::int64_t k, std::int64_t pad, std::int64_t dilation = 1) {
  auto p = conv_params(1, k, 1, pad, dilation);
  p.erase("filters");
  p["depth_multiplier"] = mult;
  return p;
}

inline ParamMap pool_params(std::int64_t k, std::int64_t stride, std::int64_t pad) {
  return {{"kernel_h", k}, {"kernel_w", k}, {"stride_h", stride}, {"stride_w", stride},
          {"pad_h", pad},  {"pad_w", pad},  {"padding", std::string("SAME")}};
}

// Conv2d, Relu and Add with the degree ranges of the worked example.
inline BlockCorpus three_op_corpus() {
  BlockCorpus c;
  for (auto [op, in] : std::vector<std::pair<std::string, int>>{{"Conv2d", 1}, {"Relu", 1}, {"Add", 2}}) {
    Block b = single_operator_block(op);
    b.in_degree = {in};
    b.out_degree = {0, 1, 2};
    c.blocks.push_back(b);
  }
  return c;
}

// Three models realizing the observation counts of the worked example.
inline std::vector<ModelSpec> three_model_fixture() {
  std::vector<ModelSpec> out;
  {
    ModelBuilder b;
    const int p = b.input({1, 8, 8, 3});
    const int c = b.add("Conv2d", conv_params(4, 1, 1, 0), {p});
    const int r1 = b.add("Relu", {}, {c});
    const int r2 = b.add("Relu", {}, {c});
    b.add("Add", {}, {r1, r2});
    out.push_back(b.build());
  }
  {
    ModelBuilder b;
    const int p = b.input({1, 8, 8, 3});
    const int c = b.add("Conv2d", conv_params(4, 3, 1, 1), {p});
    const int r = b.add("Relu", {}, {c});
    const int p2 = b.input({1, 8, 8, 4});
    const int a = b.add("Add", {}, {r, p2});
    b.add("Add", {}, {a, a});
    out.push_back(b.build());
  }
  {
    ModelBuilder b;
    const int p1 = b.input({1, 4, 4, 4});
    const int p2 = b.input({1, 4, 4, 4});
    b.add("Add", {}, {p1, p2});
    const int p3 = b.input({1, 2, 2, 4});
    const int p4 = b.input({1, 2, 2, 4});
    b.add("Add", {}, {p3, p4});
    out.push_back(b.build());
  }
  return out;
}

// One campaign-style model: random chooser vocabulary, all mutations, the
// same per-round pipeline the harness uses.
inline ModelSpec campaign_model(std::uint64_t seed, int blocks_min, int blocks_max, bool mutations = true,
                                const BlockCorpus* corpus = nullptr) {
  const BlockCorpus& c = corpus ? *corpus : default_corpus();
  CampaignConfig cfg;
  cfg.blocks_min = blocks_min;
  cfg.blocks_max = blocks_max;
  cfg.mutations = mutations;
  for (int attempt = 0; attempt < 50; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    InputRequest req;
    req.n = static_cast<int>(rng.uniform_int(blocks_min, blocks_max));
    req.blocks = random_chooser(c, rng, req.n);
    if (mutations) req.action = select_mutations(cfg.mutation, rng);
    try {
      return input_mutation(c, req, cfg, rng);
    } catch (const Error&) {
    }
  }
  throw GenerationError("fixture: no model for seed " + std::to_string(seed));
}

}  // namespace fixtures
