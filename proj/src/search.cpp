#include "gfuzz/search.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "gfuzz/error.hpp"

namespace gfuzz {

void SearchConfig::validate() const {
  if (!(e >= 0)) throw ConfigError("search: e must be >= 0");
  if (tc1 < 1) throw ConfigError("search: tc1 must be >= 1");
  if (tc2 < 1) throw ConfigError("search: tc2 must be >= 1");
  if (max_children < 1) throw ConfigError("search: max_children must be >= 1");
}

double uct_potential(double v, double n, double parent_visits, double e) {
  if (n <= 0) return std::numeric_limits<double>::infinity();
  return v / n + e * std::sqrt(std::log(parent_visits) / n);
}

MctsTree::MctsTree(const BlockCorpus& corpus, SearchConfig config) : corpus_(corpus), config_(config) {
  config_.validate();
  if (corpus_.blocks.empty()) throw ConfigError("search: empty corpus");
  reset();
}

void MctsTree::reset() {
  nodes_.assign(1, MctsNode{});
}

std::vector<int> MctsTree::path_blocks(int node) const {
  std::vector<int> out;
  for (int cur = node; cur > 0; cur = nodes_[static_cast<std::size_t>(cur)].parent)
    out.push_back(nodes_[static_cast<std::size_t>(cur)].block);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<int> MctsTree::expansion_candidates(int node, const CoverageState& coverage) const {
  const auto path = path_blocks(node);
  std::set<int> excluded(path.begin(), path.end());
  for (int c : nodes_[static_cast<std::size_t>(node)].children) excluded.insert(nodes_[static_cast<std::size_t>(c)].block);

  const auto& ops = coverage.operator_types();
  std::vector<double> olc(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) olc[i] = coverage.olc_op(ops[i]);
  std::vector<std::size_t> order(ops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return olc[a] < olc[b]; });

  auto on_path = [&](const std::string& op) {
    for (int b : path)
      if (corpus_.blocks[static_cast<std::size_t>(b)].contains_operator(op)) return true;
    return false;
  };
  // Prefer operators the path does not cover yet.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i : order) {
      if (pass == 0 && on_path(ops[i])) continue;
      std::vector<int> blocks;
      for (std::size_t b = 0; b < corpus_.blocks.size(); ++b)
        if (!excluded.count(static_cast<int>(b)) && corpus_.blocks[b].contains_operator(ops[i]))
          blocks.push_back(static_cast<int>(b));
      if (!blocks.empty()) return blocks;
    }
  }
  return {};
}

bool MctsTree::can_expand(int node, const CoverageState& coverage) const {
  const MctsNode& n = nodes_[static_cast<std::size_t>(node)];
  if (n.depth >= config_.tc1 || static_cast<int>(n.children.size()) >= config_.max_children) return false;
  return !expansion_candidates(node, coverage).empty();
}

void MctsTree::refresh_exhausted(int node, const CoverageState& coverage) {
  for (int cur = node; cur >= 0; cur = nodes_[static_cast<std::size_t>(cur)].parent) {
    MctsNode& n = nodes_[static_cast<std::size_t>(cur)];
    if (cur > 0 && n.sims < config_.tc2) return;
    if (can_expand(cur, coverage)) return;
    for (int c : n.children)
      if (!nodes_[static_cast<std::size_t>(c)].exhausted) return;
    n.exhausted = true;
  }
}

MctsTree::Choice MctsTree::choose(const CoverageState& coverage, Rng& rng) {
  int cur = 0;
  for (;;) {
    if (nodes_[0].exhausted) {
      reset();
      ++resets_;
      cur = 0;
    }
    if (can_expand(cur, coverage)) {
      const auto cands = expansion_candidates(cur, coverage);
      MctsNode child;
      child.block = cands[rng.index(cands.size())];
      child.parent = cur;
      child.depth = nodes_[static_cast<std::size_t>(cur)].depth + 1;
      const int id = static_cast<int>(nodes_.size());
      nodes_.push_back(child);
      nodes_[static_cast<std::size_t>(cur)].children.push_back(id);
      return {id, path_blocks(id), true};
    }
    const MctsNode& n = nodes_[static_cast<std::size_t>(cur)];
    int best = -1;
    double best_u = -std::numeric_limits<double>::infinity();
    for (int c : n.children) {
      const MctsNode& ch = nodes_[static_cast<std::size_t>(c)];
      if (ch.exhausted) continue;
      const double u = uct_potential(ch.v, ch.n, n.n, config_.e);
      if (best < 0 || u > best_u || (u == best_u && ch.block < nodes_[static_cast<std::size_t>(best)].block)) {
        best = c;
        best_u = u;
      }
    }
    if (best >= 0) {
      cur = best;
      continue;
    }
    if (cur > 0 && n.sims < config_.tc2) return {cur, path_blocks(cur), false};
    refresh_exhausted(cur, coverage);
    cur = 0;
  }
}

void MctsTree::backpropagate(int node, bool reward) {
  if (node < 0 || node >= static_cast<int>(nodes_.size())) throw std::out_of_range("backpropagate: bad node");
  ++nodes_[static_cast<std::size_t>(node)].sims;
  for (int cur = node; cur >= 0; cur = nodes_[static_cast<std::size_t>(cur)].parent) {
    MctsNode& n = nodes_[static_cast<std::size_t>(cur)];
    ++n.n;
    n.v += reward ? 1 : 0;
  }
}

nlohmann::json MctsTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"block", n.block == -1 ? std::string() : corpus_.blocks[static_cast<std::size_t>(n.block)].name},
                     {"parent", n.parent},
                     {"depth", n.depth},
                     {"v", n.v},
                     {"n", n.n},
                     {"sims", n.sims},
                     {"exhausted", n.exhausted},
                     {"children", n.children}});
  }
  return {{"resets", resets_}, {"nodes", nodes}};
}

std::vector<int> random_chooser(const BlockCorpus& corpus, Rng& rng, int block_count) {
  if (corpus.blocks.empty()) throw ConfigError("random chooser: empty corpus");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::max(block_count, 0)));
  for (int i = 0; i < block_count; ++i) out.push_back(static_cast<int>(rng.index(corpus.blocks.size())));
  return out;
}

}  // namespace gfuzz
