#include "gfuzz/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "gfuzz/error.hpp"
#include "gfuzz/operators.hpp"

namespace gfuzz {

namespace {

constexpr MutationKind kAllKinds[] = {MutationKind::kGEA, MutationKind::kGER, MutationKind::kBNA,
                                      MutationKind::kBNR, MutationKind::kTSM, MutationKind::kPM};

// 10 * 0.1 is not exactly 1.0 in binary; snap near-integers before rounding.
int scaled_count(std::size_t nodes, double r, bool ceil) {
  const double x = static_cast<double>(nodes) * r;
  const double snapped = std::round(x);
  if (std::abs(x - snapped) < 1e-9) return static_cast<int>(snapped);
  return static_cast<int>(ceil ? std::ceil(x) : std::floor(x));
}

std::vector<int> topo_positions(const Graph& g) {
  auto order = topological_order(g);
  if (!order) throw ValidationError("mutation on a cyclic graph");
  std::vector<int> pos(g.nodes.size());
  for (std::size_t i = 0; i < order->size(); ++i) pos[static_cast<std::size_t>((*order)[i])] = static_cast<int>(i);
  return pos;
}

// Bindings for `node` after a new input slot `degree` (the old degree) is
// appended, or nullopt if the block cannot take it.
std::optional<std::vector<InputBinding>> bindings_after_add(const GraphNode& node, int degree) {
  const Block& b = *node.block;
  if (node.bindings.empty()) {
    if (!can_absorb(b, degree + 1)) return std::nullopt;
    return std::vector<InputBinding>{};
  }
  for (int m = 0; m < static_cast<int>(b.members.size()); ++m) {
    if (!is_variadic(b.members[static_cast<std::size_t>(m)])) continue;
    auto out = node.bindings;
    out.push_back({m, degree});
    return out;
  }
  return std::nullopt;
}

std::optional<std::vector<InputBinding>> bindings_after_remove(const GraphNode& node, int degree, int slot) {
  const Block& b = *node.block;
  if (node.bindings.empty()) {
    if (!can_absorb(b, degree - 1)) return std::nullopt;
    if (!bindings_valid(b, default_bindings(b, degree - 1), degree - 1)) return std::nullopt;
    return std::vector<InputBinding>{};
  }
  std::vector<InputBinding> out;
  for (auto bind : node.bindings) {
    if (bind.slot == slot) continue;
    if (bind.slot > slot) --bind.slot;
    out.push_back(bind);
  }
  if (!bindings_valid(b, out, degree - 1)) return std::nullopt;
  return out;
}

}  // namespace

std::string_view mutation_name(MutationKind k) {
  switch (k) {
    case MutationKind::kGEA: return "GEA";
    case MutationKind::kGER: return "GER";
    case MutationKind::kBNA: return "BNA";
    case MutationKind::kBNR: return "BNR";
    case MutationKind::kTSM: return "TSM";
    case MutationKind::kPM: return "PM";
  }
  return "?";
}

MutationKind mutation_from_name(std::string_view name) {
  for (auto k : kAllKinds)
    if (mutation_name(k) == name) return k;
  throw ConfigError("unknown mutation '" + std::string(name) + "'");
}

bool is_model_level(MutationKind k) {
  return k == MutationKind::kGEA || k == MutationKind::kGER || k == MutationKind::kBNA || k == MutationKind::kBNR;
}

void MutationConfig::validate() const {
  if (enabled.empty()) throw ConfigError("mutation: at least one mutation must be enabled");
  if (r_choices.empty()) throw ConfigError("mutation: r_choices must be non-empty");
  for (double r : r_choices)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("mutation: r must satisfy 0 <= r < 1");
}

bool MutationAction::has(MutationKind k) const {
  return std::any_of(mutations.begin(), mutations.end(), [k](const AppliedMutation& m) { return m.kind == k; });
}

MutationAction select_mutations(const MutationConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<MutationKind> chosen;
  for (auto k : cfg.enabled)
    if (rng.bernoulli(0.5)) chosen.push_back(k);
  if (chosen.empty()) chosen.push_back(cfg.enabled[rng.index(cfg.enabled.size())]);
  MutationAction action;
  for (auto k : kAllKinds) {
    if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) continue;
    AppliedMutation m{k, 0.0};
    if (is_model_level(k)) m.r = cfg.r_choices[rng.index(cfg.r_choices.size())];
    action.mutations.push_back(m);
  }
  return action;
}

// ---------------------------------------------------------------------------

MutationStats gea(Graph& g, double r, Rng& rng) {
  MutationStats stats;
  stats.requested = scaled_count(g.node_count(), r, true);
  for (int added = 0; added < stats.requested; ++added) {
    const auto pos = topo_positions(g);
    struct Candidate {
      int u, v;
      std::vector<InputBinding> bindings;
    };
    std::vector<Candidate> eligible;
    for (const auto& src : g.nodes) {
      const int out = g.out_degree(src.id);
      if (!src.block->out_degree.count(out + 1)) continue;
      for (const auto& dst : g.nodes) {
        if (pos[static_cast<std::size_t>(src.id)] >= pos[static_cast<std::size_t>(dst.id)]) continue;
        const int in = g.in_degree(dst.id);
        if (!dst.block->in_degree.count(in + 1)) continue;
        auto bindings = bindings_after_add(dst, in);
        if (!bindings) continue;
        eligible.push_back({src.id, dst.id, std::move(*bindings)});
      }
    }
    if (eligible.empty()) break;
    auto& c = eligible[rng.index(eligible.size())];
    g.add_edge(c.u, c.v);
    g.nodes[static_cast<std::size_t>(c.v)].bindings = std::move(c.bindings);
    ++stats.applied;
  }
  return stats;
}

MutationStats ger(Graph& g, double r, Rng& rng) {
  MutationStats stats;
  stats.requested = scaled_count(g.node_count(), r, false);
  for (int removed = 0; removed < stats.requested; ++removed) {
    struct Candidate {
      std::size_t edge;
      std::vector<InputBinding> bindings;
    };
    std::vector<Candidate> eligible;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const Edge& e = g.edges[i];
      const auto& src = g.nodes[static_cast<std::size_t>(e.src)];
      const auto& dst = g.nodes[static_cast<std::size_t>(e.dst)];
      const int in = g.in_degree(e.dst);
      if (in - 1 < 1 || !dst.block->in_degree.count(in - 1)) continue;
      if (!src.block->out_degree.count(g.out_degree(e.src) - 1)) continue;
      auto bindings = bindings_after_remove(dst, in, e.dst_slot);
      if (!bindings) continue;
      eligible.push_back({i, std::move(*bindings)});
    }
    if (eligible.empty()) break;
    auto& c = eligible[rng.index(eligible.size())];
    const int dst = g.edges[c.edge].dst;
    g.remove_edge(c.edge);
    g.nodes[static_cast<std::size_t>(dst)].bindings = std::move(c.bindings);
    ++stats.applied;
  }
  return stats;
}

bool duplicate_member(Graph& g, int node_id, int member) {
  GraphNode& node = g.nodes[static_cast<std::size_t>(node_id)];
  if (!node.block || !node.block->is_subgraph()) return false;
  Block b = *node.block;
  const int degree = g.in_degree(node_id);
  auto bindings = effective_bindings(node, degree);
  const int copy = static_cast<int>(b.members.size());

  b.members.push_back(b.members[static_cast<std::size_t>(member)]);
  b.member_params.push_back(b.member_params[static_cast<std::size_t>(member)]);
  const auto original_edges = b.inner_edges;
  for (const auto& e : original_edges)
    if (e.dst == member) b.inner_edges.push_back({e.src, copy});
  const auto original_bindings = bindings;
  for (const auto& bind : original_bindings)
    if (bind.member == member) bindings.push_back({copy, bind.slot});

  // Join into the nearest downstream variadic member, if any.
  std::vector<int> dist(b.members.size(), -1);
  std::deque<int> queue{member};
  dist[static_cast<std::size_t>(member)] = 0;
  int join = -1;
  while (!queue.empty() && join < 0) {
    int x = queue.front();
    queue.pop_front();
    for (const auto& e : original_edges) {
      if (e.src != x || dist[static_cast<std::size_t>(e.dst)] >= 0) continue;
      dist[static_cast<std::size_t>(e.dst)] = dist[static_cast<std::size_t>(x)] + 1;
      if (is_variadic(b.members[static_cast<std::size_t>(e.dst)])) {
        join = e.dst;
        break;
      }
      queue.push_back(e.dst);
    }
  }
  if (join >= 0) b.inner_edges.push_back({copy, join});

  try {
    validate_block(b);
  } catch (const ValidationError&) {
    return false;
  }
  if (!bindings_valid(b, bindings, degree)) return false;
  node.block = std::move(b);
  node.bindings = std::move(bindings);
  return true;
}

bool remove_member(Graph& g, int node_id, int member) {
  GraphNode& node = g.nodes[static_cast<std::size_t>(node_id)];
  if (!node.block || !node.block->is_subgraph() || node.block->members.size() <= 2) return false;
  const Block& old = *node.block;
  const int degree = g.in_degree(node_id);
  const auto old_bindings = effective_bindings(node, degree);

  std::vector<int> preds;
  std::vector<int> consumers;
  std::vector<InnerEdge> edges;
  for (const auto& e : old.inner_edges) {
    if (e.dst == member) preds.push_back(e.src);
    if (e.src == member) consumers.push_back(e.dst);
    if (e.src != member && e.dst != member) edges.push_back(e);
  }
  std::vector<int> own_slots;
  std::vector<InputBinding> bindings;
  for (const auto& bind : old_bindings) {
    if (bind.member == member) own_slots.push_back(bind.slot);
    else bindings.push_back(bind);
  }
  auto slot_used = [&](int slot) {
    return std::any_of(bindings.begin(), bindings.end(), [slot](const InputBinding& x) { return x.slot == slot; });
  };
  auto input_count = [&](int m) {
    int n = 0;
    for (const auto& e : edges) n += e.dst == m;
    for (const auto& bind : bindings) n += bind.member == m;
    return n;
  };

  // Starved consumers take the removed member's inputs: first slots that
  // would otherwise be orphaned, then its inner producers, then any of its
  // slots.
  for (int c : consumers) {
    while (input_count(c) < min_inputs(old.members[static_cast<std::size_t>(c)])) {
      auto orphan = std::find_if(own_slots.begin(), own_slots.end(), [&](int s) { return !slot_used(s); });
      if (orphan != own_slots.end()) bindings.push_back({c, *orphan});
      else if (!preds.empty()) edges.push_back({preds.front(), c});
      else if (!own_slots.empty()) bindings.push_back({c, own_slots.front()});
      else return false;
    }
  }
  for (int s : own_slots) {
    if (slot_used(s)) continue;
    int variadic = -1;
    for (int m = 0; m < static_cast<int>(old.members.size()) && variadic < 0; ++m)
      if (m != member && is_variadic(old.members[static_cast<std::size_t>(m)])) variadic = m;
    if (variadic < 0) return false;
    bindings.push_back({variadic, s});
  }
  if (edges.empty()) return false;

  Block b = old;
  b.members.erase(b.members.begin() + member);
  b.member_params.erase(b.member_params.begin() + member);
  for (auto& e : edges) {
    if (e.src > member) --e.src;
    if (e.dst > member) --e.dst;
  }
  for (auto& bind : bindings)
    if (bind.member > member) --bind.member;
  b.inner_edges = std::move(edges);
  try {
    validate_block(b);
  } catch (const ValidationError&) {
    return false;
  }
  if (!bindings_valid(b, bindings, degree)) return false;
  const int sinks = static_cast<int>(block_sinks(b).size());
  for (const auto& e : g.edges)
    if (e.src == node_id && e.src_slot >= sinks) return false;
  node.block = std::move(b);
  node.bindings = std::move(bindings);
  return true;
}

MutationStats bna(Graph& g, double r, Rng& rng) {
  MutationStats stats;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!g.nodes[i].block || !g.nodes[i].block->is_subgraph()) continue;
    if (!rng.bernoulli(r)) continue;
    ++stats.requested;
    const int member = static_cast<int>(rng.index(g.nodes[i].block->members.size()));
    if (duplicate_member(g, static_cast<int>(i), member)) ++stats.applied;
  }
  return stats;
}

MutationStats bnr(Graph& g, double r, Rng& rng) {
  MutationStats stats;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!g.nodes[i].block || !g.nodes[i].block->is_subgraph()) continue;
    if (!rng.bernoulli(r)) continue;
    ++stats.requested;
    std::vector<int> order(g.nodes[i].block->members.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t j = order.size(); j > 1; --j) std::swap(order[j - 1], order[rng.index(j)]);
    for (int m : order) {
      if (remove_member(g, static_cast<int>(i), m)) {
        ++stats.applied;
        break;
      }
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------

Shape tsm(const Shape& shape, const ShapeDomain& domain, Rng& rng) {
  if (shape.size() != 4) throw ValidationError("tsm: expected a rank-4 shape");
  const std::vector<std::int64_t>* dims[4] = {&domain.n, &domain.h, &domain.w, &domain.c};
  std::vector<int> pick;
  for (int i = 0; i < 4; ++i)
    if (rng.bernoulli(0.5)) pick.push_back(i);
  if (pick.empty()) pick.push_back(static_cast<int>(rng.index(4)));
  Shape out = shape;
  for (int i : pick) {
    const auto& values = *dims[i];
    if (values.empty()) continue;
    out[static_cast<std::size_t>(i)] = values[rng.index(values.size())];
  }
  return out;
}

ParamMap pm(const ParamMap& params, const ParamSchema& schema, Rng& rng) {
  ParamMap out = params;
  for (const auto& p : schema) {
    switch (p.domain.kind) {
      case ParamDomain::Kind::kEnum: out[p.name] = p.domain.choices[rng.index(p.domain.choices.size())]; break;
      case ParamDomain::Kind::kRange: out[p.name] = rng.uniform_int(p.domain.low, p.domain.high); break;
      case ParamDomain::Kind::kShapeDependent: break;
    }
  }
  return out;
}

ParamMap default_params(const ParamSchema& schema) {
  ParamMap out;
  for (const auto& p : schema) {
    if (p.domain.kind == ParamDomain::Kind::kEnum) out[p.name] = p.domain.choices.front();
    else if (p.domain.kind == ParamDomain::Kind::kRange) out[p.name] = p.domain.low;
  }
  return out;
}

}  // namespace gfuzz
