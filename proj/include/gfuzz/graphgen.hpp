#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gfuzz/ir.hpp"
#include "gfuzz/rng.hpp"

namespace gfuzz {

enum class TopologyModel { kWS, kRN };

struct GraphGenConfig {
  TopologyModel model = TopologyModel::kRN;
  int n = 1;
  int k = 2;
  double p = 0.9;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

using EdgeList = std::vector<std::pair<int, int>>;

// Chain 0→1→…→n−1, then for each i (in order) repeat k − kc_i times: with
// probability p add i→j, j drawn uniformly from later nodes that still have
// fewer than k neighbors and are not yet adjacent to i.
EdgeList rn_model(int n, int k, double p, Rng& rng);

// Ring lattice on floor(k/2)*2 neighbors, rewired with probability p, edges
// oriented low→high. Components are joined by s−1→s edges.
EdgeList ws_model(int n, int k, double p, Rng& rng);

// Block-less graph over n nodes; every edge goes from a lower to a higher id.
Graph generate_topology(const GraphGenConfig& cfg);

// Gives every node a block. `allowed` indexes the chooser's blocks; when none
// fits a node the full corpus is used, and when the corpus has nothing for
// the realized in-degree, in-edges are deleted down to the nearest degree
// some block accepts. Nodes without inputs receive Placeholder sources unless
// their block accepts in-degree 0. Throws GenerationError when the result
// still violates a degree range (callers retry with a fresh stream).
Graph assign_blocks(Graph g, const BlockCorpus& corpus, std::span<const std::size_t> allowed, Rng& rng);

// True if every node's realized degrees lie in its block's ranges and its
// bindings (explicit or default) fill every input slot.
bool degrees_conform(const Graph& g);

}  // namespace gfuzz
