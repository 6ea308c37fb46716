#include "gfuzz/graphgen.hpp"

#include <algorithm>
#include <numeric>

#include "gfuzz/error.hpp"

namespace gfuzz {

void GraphGenConfig::validate() const {
  if (n < 1) throw ConfigError("graphgen: n must be >= 1");
  if (k < 2) throw ConfigError("graphgen: k must be >= 2");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("graphgen: p must lie in (0, 1]");
}

EdgeList rn_model(int n, int k, double p, Rng& rng) {
  EdgeList edges;
  std::vector<int> kc(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<bool>> adj(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
  auto link = [&](int a, int b) {
    edges.emplace_back(a, b);
    ++kc[static_cast<std::size_t>(a)];
    ++kc[static_cast<std::size_t>(b)];
    adj[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
    adj[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
  };
  for (int i = 0; i + 1 < n; ++i) link(i, i + 1);

  for (int i = 0; i < n; ++i) {
    const int repeats = k - kc[static_cast<std::size_t>(i)];
    for (int r = 0; r < repeats; ++r) {
      if (kc[static_cast<std::size_t>(i)] >= k) break;
      if (!rng.bernoulli(p)) continue;
      std::vector<int> eligible;
      for (int j = i + 1; j < n; ++j)
        if (kc[static_cast<std::size_t>(j)] < k && !adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
          eligible.push_back(j);
      if (eligible.empty()) break;
      link(i, eligible[rng.index(eligible.size())]);
    }
  }
  return edges;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace

EdgeList ws_model(int n, int k, double p, Rng& rng) {
  int half = std::min(k / 2, (n - 1) / 2);
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  auto connected = [&](int a, int b) { return adj[static_cast<std::size_t>(a)].count(b) > 0; };
  auto connect = [&](int a, int b) {
    adj[static_cast<std::size_t>(a)].insert(b);
    adj[static_cast<std::size_t>(b)].insert(a);
  };
  auto disconnect = [&](int a, int b) {
    adj[static_cast<std::size_t>(a)].erase(b);
    adj[static_cast<std::size_t>(b)].erase(a);
  };
  if (n == 2) connect(0, 1);
  for (int j = 1; j <= half; ++j)
    for (int u = 0; u < n; ++u) connect(u, (u + j) % n);

  for (int j = 1; j <= half; ++j) {
    for (int u = 0; u < n; ++u) {
      const int v = (u + j) % n;
      if (!connected(u, v) || !rng.bernoulli(p)) continue;
      std::vector<int> targets;
      for (int w = 0; w < n; ++w)
        if (w != u && !connected(u, w)) targets.push_back(w);
      if (targets.empty()) continue;
      const int w = targets[rng.index(targets.size())];
      disconnect(u, v);
      connect(u, w);
    }
  }

  EdgeList edges;
  UnionFind uf(n);
  for (int a = 0; a < n; ++a)
    for (int b : adj[static_cast<std::size_t>(a)])
      if (a < b) {
        edges.emplace_back(a, b);
        uf.unite(a, b);
      }
  for (int s = 1; s < n; ++s) {
    if (uf.find(s) == uf.find(s - 1)) continue;
    edges.emplace_back(s - 1, s);
    uf.unite(s - 1, s);
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

Graph generate_topology(const GraphGenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  EdgeList edges = cfg.model == TopologyModel::kRN ? rn_model(cfg.n, cfg.k, cfg.p, rng)
                                                    : ws_model(cfg.n, cfg.k, cfg.p, rng);
  Graph g;
  for (int i = 0; i < cfg.n; ++i) g.add_node();
  for (auto [a, b] : edges) g.add_edge(a, b);
  return g;
}

// ---------------------------------------------------------------------------

namespace {

bool fits_in(const Block& b, int d) { return b.in_degree.count(d) && (d == 0 || can_absorb(b, d)); }

std::vector<std::size_t> candidates_for(const BlockCorpus& corpus, std::span<const std::size_t> pool, int d,
                                        int out) {
  std::vector<std::size_t> c;
  for (std::size_t i : pool) {
    const Block& b = corpus.blocks[i];
    if (fits_in(b, d) && b.out_degree.count(out)) c.push_back(i);
  }
  return c;
}

// Smallest positive in-degree `b` accepts, or -1.
int min_positive_in(const Block& b) {
  for (int d : b.in_degree)
    if (d > 0 && can_absorb(b, d)) return d;
  return -1;
}

int max_out_in_corpus(const BlockCorpus& corpus) {
  int m = 0;
  for (const auto& b : corpus.blocks) m = std::max(m, *b.out_degree.rbegin());
  return m;
}

std::vector<std::size_t> in_edges(const Graph& g, int node) {
  std::vector<std::size_t> idx;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (g.edges[e].dst == node) idx.push_back(e);
  return idx;
}

}  // namespace

bool degrees_conform(const Graph& g) {
  for (const auto& node : g.nodes) {
    if (!node.block) return false;
    const Block& b = *node.block;
    const int in = g.in_degree(node.id);
    if (!b.in_degree.count(in) || !b.out_degree.count(g.out_degree(node.id))) return false;
    std::vector<InputBinding> bindings;
    try {
      bindings = effective_bindings(node, in);
    } catch (const WiringError&) {
      return false;
    }
    if (!bindings_valid(b, bindings, in)) return false;
  }
  for (const auto& e : g.edges) {
    const auto& src = g.nodes[static_cast<std::size_t>(e.src)];
    if (e.src_slot < 0 || e.src_slot >= static_cast<int>(block_sinks(*src.block).size())) return false;
  }
  return is_acyclic(g);
}

Graph assign_blocks(Graph g, const BlockCorpus& corpus, std::span<const std::size_t> allowed, Rng& rng) {
  std::vector<std::size_t> everything(corpus.blocks.size());
  std::iota(everything.begin(), everything.end(), 0);
  if (allowed.empty()) allowed = everything;

  // Trim fan-out no block can carry, dropping edges whose target keeps at
  // least one input.
  const int max_out = max_out_in_corpus(corpus);
  for (int u = 0; u < static_cast<int>(g.nodes.size()); ++u) {
    for (std::size_t e = g.edges.size(); e-- > 0 && g.out_degree(u) > max_out;) {
      if (g.edges[e].src == u && g.in_degree(g.edges[e].dst) > 1) g.remove_edge(e);
    }
  }

  const int original = static_cast<int>(g.nodes.size());
  for (int u = 0; u < original; ++u) {
    const int out = g.out_degree(u);
    int d = g.in_degree(u);

    if (d == 0) {
      // Source: any block either takes no inputs or is fed by Placeholders.
      auto pick_from = [&](std::span<const std::size_t> pool) -> std::optional<std::size_t> {
        std::vector<std::size_t> c;
        for (std::size_t i : pool) {
          const Block& b = corpus.blocks[i];
          if (b.out_degree.count(out) && (b.in_degree.count(0) || min_positive_in(b) > 0)) c.push_back(i);
        }
        if (c.empty()) return std::nullopt;
        return c[rng.index(c.size())];
      };
      auto chosen = pick_from(allowed);
      if (!chosen) chosen = pick_from(everything);
      if (!chosen) throw GenerationError("no block can serve as a source node");
      const Block& b = corpus.blocks[*chosen];
      g.nodes[static_cast<std::size_t>(u)].block = b;
      if (!b.in_degree.count(0)) {
        const int need = min_positive_in(b);
        for (int s = 0; s < need; ++s) {
          int ph = g.add_node(placeholder_block());
          g.add_edge(ph, u);
        }
      }
      continue;
    }

    auto c = candidates_for(corpus, allowed, d, out);
    if (c.empty()) c = candidates_for(corpus, everything, d, out);
    if (c.empty()) {
      // Repair: nearest accepted in-degree below d, else above d by
      // injecting graph inputs.
      int target = -1;
      for (int t = d - 1; t >= 1 && target < 0; --t)
        if (!candidates_for(corpus, everything, t, out).empty()) target = t;
      if (target < 0)
        for (int t = d + 1; t <= d + 4 && target < 0; ++t)
          if (!candidates_for(corpus, everything, t, out).empty()) target = t;
      if (target < 0)
        throw GenerationError("no corpus block accepts node " + std::to_string(u) + " (in " + std::to_string(d) +
                              ", out " + std::to_string(out) + ")");
      while (g.in_degree(u) > target) {
        auto idx = in_edges(g, u);
        g.remove_edge(idx[rng.index(idx.size())]);
      }
      while (g.in_degree(u) < target) {
        int ph = g.add_node(placeholder_block());
        g.add_edge(ph, u);
      }
      d = target;
      c = candidates_for(corpus, allowed, d, out);
      if (c.empty()) c = candidates_for(corpus, everything, d, out);
    }
    g.nodes[static_cast<std::size_t>(u)].block = corpus.blocks[c[rng.index(c.size())]];
  }

  // In-degree repairs lower the fan-out of earlier nodes; re-pick those
  // whose block no longer accepts it.
  for (int u = 0; u < original; ++u) {
    const Block& b = *g.nodes[static_cast<std::size_t>(u)].block;
    const int out = g.out_degree(u);
    if (b.out_degree.count(out)) continue;
    const int d = g.in_degree(u);
    auto c = candidates_for(corpus, everything, d, out);
    if (d == 0) {
      c.clear();
      for (std::size_t i : everything)
        if (corpus.blocks[i].in_degree.count(0) && corpus.blocks[i].out_degree.count(out)) c.push_back(i);
    }
    if (c.empty()) throw GenerationError("node " + std::to_string(u) + " has unsupported out-degree " + std::to_string(out));
    g.nodes[static_cast<std::size_t>(u)].block = corpus.blocks[c[rng.index(c.size())]];
  }
  if (!degrees_conform(g)) throw GenerationError("assigned graph violates a degree range");
  return g;
}

}  // namespace gfuzz
