#pragma once

#include <cmath>
#include <vector>

#include <json.hpp>

#include "gfuzz/coverage.hpp"
#include "gfuzz/ir.hpp"
#include "gfuzz/rng.hpp"

namespace gfuzz {

enum class SearchMode { kMcts, kRandom };

struct SearchConfig {
  double e = 1.0 / std::sqrt(2.0);
  int tc1 = 10;  // max tree depth
  int tc2 = 1;   // max simulations per node
  int max_children = 3;
  SearchMode mode = SearchMode::kMcts;

  void validate() const;
};

// v/n + e*sqrt(ln N / n). Unvisited nodes (n = 0) score +inf.
double uct_potential(double v, double n, double parent_visits, double e);

struct MctsNode {
  int block = -1;  // corpus index; -1 at the root
  int parent = -1;
  int depth = 0;
  int v = 0;
  int n = 0;
  int sims = 0;  // simulations run from this node
  bool exhausted = false;
  std::vector<int> children;
};

class MctsTree {
 public:
  MctsTree(const BlockCorpus& corpus, SearchConfig config);

  struct Choice {
    int node = 0;                   // node to simulate
    std::vector<int> blocks;        // corpus indices on the root→node path
    bool expanded = false;          // node was created by this call
  };

  // Selection then expansion. A fully exhausted tree is reset first.
  Choice choose(const CoverageState& coverage, Rng& rng);
  void backpropagate(int node, bool reward);

  const std::vector<MctsNode>& nodes() const { return nodes_; }
  const MctsNode& root() const { return nodes_[0]; }
  std::vector<int> path_blocks(int node) const;
  int resets() const { return resets_; }
  nlohmann::json to_json() const;

 private:
  // Blocks that could become a new child of `node`, all for the op with the
  // lowest coverage that still has candidates.
  std::vector<int> expansion_candidates(int node, const CoverageState& coverage) const;
  bool can_expand(int node, const CoverageState& coverage) const;
  void refresh_exhausted(int node, const CoverageState& coverage);
  void reset();

  const BlockCorpus& corpus_;
  SearchConfig config_;
  std::vector<MctsNode> nodes_;
  int resets_ = 0;
};

// Uniform i.i.d. draws with replacement.
std::vector<int> random_chooser(const BlockCorpus& corpus, Rng& rng, int block_count);

}  // namespace gfuzz
