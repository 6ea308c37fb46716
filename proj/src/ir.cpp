#include "gfuzz/ir.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>

#include "gfuzz/error.hpp"
#include "gfuzz/operators.hpp"

namespace gfuzz {

std::string_view dtype_name(DType t) {
  switch (t) {
    case DType::kF32: return "f32";
    case DType::kI32: return "i32";
    case DType::kI8: return "i8";
  }
  return "?";
}

DType dtype_from_name(std::string_view name) {
  if (name == "f32") return DType::kF32;
  if (name == "i32") return DType::kI32;
  if (name == "i8") return DType::kI8;
  throw ValidationError("unknown dtype '" + std::string(name) + "'");
}

std::int64_t element_count(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_string(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string param_string(const ParamValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  const auto& list = std::get<std::vector<std::int64_t>>(v);
  std::string out = "[";
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(list[i]);
  }
  return out + "]";
}

std::int64_t param_int(const ParamMap& p, const std::string& name, std::int64_t fallback) {
  auto it = p.find(name);
  if (it == p.end()) return fallback;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  return fallback;
}

std::vector<std::int64_t> param_ints(const ParamMap& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) return {};
  if (auto* l = std::get_if<std::vector<std::int64_t>>(&it->second)) return *l;
  return {};
}

std::string param_str(const ParamMap& p, const std::string& name, const std::string& fallback) {
  auto it = p.find(name);
  if (it == p.end()) return fallback;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  return fallback;
}

ParamDomain ParamDomain::enumeration(std::vector<ParamValue> values) {
  ParamDomain d;
  d.kind = Kind::kEnum;
  d.choices = std::move(values);
  return d;
}

ParamDomain ParamDomain::range(std::int64_t lo, std::int64_t hi) {
  ParamDomain d;
  d.kind = Kind::kRange;
  d.low = lo;
  d.high = hi;
  return d;
}

ParamDomain ParamDomain::shape_dependent() { return ParamDomain{}; }

bool ParamDomain::contains(const ParamValue& v) const {
  switch (kind) {
    case Kind::kEnum: return std::find(choices.begin(), choices.end(), v) != choices.end();
    case Kind::kRange: {
      auto* i = std::get_if<std::int64_t>(&v);
      return i && *i >= low && *i <= high;
    }
    case Kind::kShapeDependent: return true;
  }
  return false;
}

const ParamSpec* find_param(const ParamSchema& schema, std::string_view name) {
  for (const auto& p : schema)
    if (p.name == name) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------

bool Block::contains_operator(std::string_view op) const {
  return std::find(members.begin(), members.end(), op) != members.end();
}

namespace {

bool members_acyclic(std::size_t n, const std::vector<InnerEdge>& edges) {
  std::vector<int> indeg(n, 0);
  for (const auto& e : edges) ++indeg[static_cast<std::size_t>(e.dst)];
  std::vector<int> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  std::size_t seen = 0;
  while (!ready.empty()) {
    int u = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& e : edges)
      if (e.src == u && --indeg[static_cast<std::size_t>(e.dst)] == 0) ready.push_back(e.dst);
  }
  return seen == n;
}

void validate_domain(const Block& b, const ParamSpec& p) {
  if (p.domain.kind == ParamDomain::Kind::kEnum && p.domain.choices.empty())
    throw ValidationError("block '" + b.name + "': param '" + p.name + "' has an empty enumeration");
  if (p.domain.kind == ParamDomain::Kind::kRange && p.domain.low > p.domain.high)
    throw ValidationError("block '" + b.name + "': param '" + p.name + "' has low > high");
}

}  // namespace

void validate_block(const Block& b) {
  if (b.name.empty()) throw ValidationError("block with empty name");
  if (b.members.empty()) throw ValidationError("block '" + b.name + "' has no members");
  if (b.member_params.size() != b.members.size())
    throw ValidationError("block '" + b.name + "': params must list one schema per member");
  if (b.in_degree.empty() || b.out_degree.empty())
    throw ValidationError("block '" + b.name + "': degree ranges must be non-empty");
  if (*b.in_degree.begin() < 0 || *b.out_degree.begin() < 0)
    throw ValidationError("block '" + b.name + "': negative degree");
  if (b.kind == BlockKind::kOperator) {
    if (b.members.size() != 1)
      throw ValidationError("block '" + b.name + "': single-operator block needs one member");
    if (!b.inner_edges.empty())
      throw ValidationError("block '" + b.name + "': single-operator block has inner edges");
  } else {
    if (b.inner_edges.empty())
      throw ValidationError("block '" + b.name + "': subgraph requires inner edges");
    const int n = static_cast<int>(b.members.size());
    for (const auto& e : b.inner_edges) {
      if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n)
        throw ValidationError("block '" + b.name + "': inner edge index out of range");
      if (e.src == e.dst) throw ValidationError("block '" + b.name + "': inner self-loop");
    }
    if (!members_acyclic(b.members.size(), b.inner_edges))
      throw ValidationError("block '" + b.name + "': inner edges form a cycle");
  }
  for (const auto& schema : b.member_params)
    for (const auto& p : schema) validate_domain(b, p);
}

std::vector<int> block_sinks(const Block& b) {
  std::vector<int> sinks;
  for (int m = 0; m < static_cast<int>(b.members.size()); ++m) {
    bool has_out = std::any_of(b.inner_edges.begin(), b.inner_edges.end(),
                               [m](const InnerEdge& e) { return e.src == m; });
    if (!has_out) sinks.push_back(m);
  }
  return sinks;
}

Block single_operator_block(const std::string& op) {
  Block b;
  b.name = op;
  b.kind = BlockKind::kOperator;
  b.members = {op};
  b.member_params = {default_schema(op)};
  return b;
}

Block placeholder_block() {
  Block b = single_operator_block("Placeholder");
  b.in_degree = {0};
  for (int i = 1; i <= 64; ++i) b.out_degree.insert(i);
  return b;
}

std::vector<std::string> BlockCorpus::operator_types() const {
  std::vector<std::string> types;
  for (const auto& b : blocks)
    for (const auto& m : b.members)
      if (std::find(types.begin(), types.end(), m) == types.end()) types.push_back(m);
  return types;
}

std::optional<std::size_t> BlockCorpus::find(std::string_view name) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].name == name) return i;
  return std::nullopt;
}

void BlockCorpus::validate() const {
  if (blocks.empty()) throw ValidationError("corpus has no blocks");
  std::set<std::string> names;
  bool source_ok = false;
  for (const auto& b : blocks) {
    validate_block(b);
    if (!names.insert(b.name).second) throw ValidationError("duplicate block name '" + b.name + "'");
    if (b.in_degree.count(0) || b.in_degree.count(1)) source_ok = true;
  }
  if (!source_ok)
    throw ValidationError("corpus has no block accepting in-degree 0 or 1; sources cannot be placed");
  // Subgraphs do not nest.
  for (const auto& b : blocks) {
    if (!b.is_subgraph()) continue;
    for (const auto& other : blocks)
      if (other.is_subgraph() && b.contains_operator(other.name))
        throw ValidationError("subgraph '" + b.name + "' nests subgraph '" + other.name + "'");
  }
}

// ---------------------------------------------------------------------------

int Graph::add_node(std::optional<Block> block) {
  GraphNode n;
  n.id = static_cast<int>(nodes.size());
  n.block = std::move(block);
  nodes.push_back(std::move(n));
  return nodes.back().id;
}

void Graph::add_edge(int src, int dst) { edges.push_back({src, 0, dst, in_degree(dst)}); }

void Graph::remove_edge(std::size_t edge_index) {
  edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(edge_index));
  normalize_slots();
}

int Graph::in_degree(int node) const {
  return static_cast<int>(
      std::count_if(edges.begin(), edges.end(), [node](const Edge& e) { return e.dst == node; }));
}

int Graph::out_degree(int node) const {
  return static_cast<int>(
      std::count_if(edges.begin(), edges.end(), [node](const Edge& e) { return e.src == node; }));
}

bool Graph::is_placeholder(int node) const {
  const auto& b = nodes[static_cast<std::size_t>(node)].block;
  return b && b->name == "Placeholder";
}

std::size_t Graph::node_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes)
    if (!is_placeholder(node.id)) ++n;
  return n;
}

void Graph::normalize_slots() {
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    if (edges[a].dst != edges[b].dst) return edges[a].dst < edges[b].dst;
    return edges[a].dst_slot < edges[b].dst_slot;
  });
  std::vector<int> next(nodes.size(), 0);
  for (std::size_t idx : order) edges[idx].dst_slot = next[static_cast<std::size_t>(edges[idx].dst)]++;
}

std::optional<std::vector<int>> topological_order(const Graph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (const auto& e : g.edges) {
    if (e.src == e.dst) return std::nullopt;
    ++indeg[static_cast<std::size_t>(e.dst)];
    succ[static_cast<std::size_t>(e.src)].push_back(e.dst);
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int v : succ[static_cast<std::size_t>(u)])
      if (--indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

bool is_acyclic(const Graph& g) { return topological_order(g).has_value(); }

namespace {

std::vector<int> inner_in_counts(const Block& b) {
  std::vector<int> counts(b.members.size(), 0);
  for (const auto& e : b.inner_edges) ++counts[static_cast<std::size_t>(e.dst)];
  return counts;
}

std::vector<int> vacancies(const Block& b) {
  std::vector<int> vac;
  auto inner = inner_in_counts(b);
  for (std::size_t m = 0; m < b.members.size(); ++m) {
    int need = std::max(0, min_inputs(b.members[m]) - inner[m]);
    for (int i = 0; i < need; ++i) vac.push_back(static_cast<int>(m));
  }
  return vac;
}

}  // namespace

std::vector<InputBinding> default_bindings(const Block& block, int degree) {
  const auto vac = vacancies(block);
  const int v = static_cast<int>(vac.size());
  std::vector<InputBinding> out;
  if (degree == 0) {
    if (v == 0) return out;
    throw WiringError("block '" + block.name + "' needs external inputs but has in-degree 0");
  }
  if (degree <= v) {
    for (int j = 0; j < v; ++j) out.push_back({vac[static_cast<std::size_t>(j)], j % degree});
    return out;
  }
  std::vector<int> variadic;
  for (std::size_t m = 0; m < block.members.size(); ++m)
    if (is_variadic(block.members[m])) variadic.push_back(static_cast<int>(m));
  if (variadic.empty())
    throw WiringError("block '" + block.name + "' cannot absorb in-degree " + std::to_string(degree));
  for (int j = 0; j < v; ++j) out.push_back({vac[static_cast<std::size_t>(j)], j});
  for (int s = v; s < degree; ++s)
    out.push_back({variadic[static_cast<std::size_t>(s - v) % variadic.size()], s});
  return out;
}

bool can_absorb(const Block& block, int degree) {
  try {
    default_bindings(block, degree);
    return true;
  } catch (const WiringError&) {
    return false;
  }
}

bool bindings_valid(const Block& block, const std::vector<InputBinding>& bindings, int degree) {
  const int members = static_cast<int>(block.members.size());
  std::vector<int> inputs = inner_in_counts(block);
  std::vector<bool> used(static_cast<std::size_t>(std::max(degree, 0)), false);
  for (const auto& b : bindings) {
    if (b.member < 0 || b.member >= members || b.slot < 0 || b.slot >= degree) return false;
    ++inputs[static_cast<std::size_t>(b.member)];
    used[static_cast<std::size_t>(b.slot)] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) return false;
  for (int m = 0; m < members; ++m) {
    const auto& op = block.members[static_cast<std::size_t>(m)];
    const int have = inputs[static_cast<std::size_t>(m)];
    const OperatorKind* k = find_builtin(op);
    if (k && k->arity_class == ArityClass::kFixed) {
      if (have != k->min_inputs) return false;
    } else if (have < min_inputs(op)) {
      return false;
    }
  }
  return true;
}

std::vector<InputBinding> effective_bindings(const GraphNode& node, int degree) {
  if (!node.bindings.empty() || !node.block) return node.bindings;
  return default_bindings(*node.block, degree);
}

Graph expand_blocks(const Graph& g) {
  Graph out;
  // first_member[node] = id of member 0 in the expanded graph.
  std::vector<int> first_member(g.nodes.size(), 0);
  for (const auto& node : g.nodes) {
    if (!node.block) throw ValidationError("expand_blocks: node " + std::to_string(node.id) + " has no block");
    first_member[static_cast<std::size_t>(node.id)] = static_cast<int>(out.nodes.size());
    const Block& b = *node.block;
    for (std::size_t m = 0; m < b.members.size(); ++m) {
      Block single = b.is_subgraph() ? single_operator_block(b.members[m]) : b;
      if (b.is_subgraph()) single.member_params = {b.member_params[m]};
      out.add_node(std::move(single));
    }
  }

  // Per expanded node, its ordered input sources.
  std::vector<std::vector<int>> sources(out.nodes.size());
  for (const auto& node : g.nodes) {
    const Block& b = *node.block;
    const int base = first_member[static_cast<std::size_t>(node.id)];
    for (const auto& e : b.inner_edges)
      sources[static_cast<std::size_t>(base + e.dst)].push_back(base + e.src);

    const int degree = g.in_degree(node.id);
    std::vector<int> slot_source(static_cast<std::size_t>(degree), -1);
    for (const auto& e : g.edges) {
      if (e.dst != node.id) continue;
      if (e.dst_slot < 0 || e.dst_slot >= degree)
        throw WiringError("node " + std::to_string(node.id) + ": input slot out of range");
      const Block& src_block = *g.nodes[static_cast<std::size_t>(e.src)].block;
      auto sinks = block_sinks(src_block);
      if (e.src_slot < 0 || e.src_slot >= static_cast<int>(sinks.size()))
        throw WiringError("node " + std::to_string(e.src) + ": output slot out of range");
      slot_source[static_cast<std::size_t>(e.dst_slot)] =
          first_member[static_cast<std::size_t>(e.src)] + sinks[static_cast<std::size_t>(e.src_slot)];
    }
    auto bindings = effective_bindings(node, degree);
    for (const auto& bind : bindings) {
      if (bind.slot < 0 || bind.slot >= degree)
        throw WiringError("node " + std::to_string(node.id) + ": binding to missing slot " +
                          std::to_string(bind.slot));
      if (bind.member < 0 || bind.member >= static_cast<int>(b.members.size()))
        throw WiringError("node " + std::to_string(node.id) + ": binding to missing member");
      sources[static_cast<std::size_t>(base + bind.member)].push_back(
          slot_source[static_cast<std::size_t>(bind.slot)]);
    }
  }
  for (std::size_t dst = 0; dst < sources.size(); ++dst)
    for (int src : sources[dst]) out.add_edge(src, static_cast<int>(dst));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<PortRef>> ModelSpec::consumers() const {
  std::vector<std::vector<PortRef>> out(nodes.size());
  for (const auto& n : nodes)
    for (std::size_t s = 0; s < n.inputs.size(); ++s)
      out[static_cast<std::size_t>(n.inputs[s].node)].push_back({n.id, static_cast<int>(s)});
  return out;
}

std::vector<int> ModelSpec::outputs() const {
  auto cons = consumers();
  std::vector<int> out;
  for (const auto& n : nodes)
    if (cons[static_cast<std::size_t>(n.id)].empty()) out.push_back(n.id);
  return out;
}

std::vector<int> ModelSpec::placeholders() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.op == "Placeholder") out.push_back(n.id);
  return out;
}

void validate_model_structure(const ModelSpec& m) {
  std::set<std::int64_t> seen_index;
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const auto& n = m.nodes[i];
    if (n.id != static_cast<int>(i)) throw ValidationError("model node ids must be dense and sorted");
    for (const auto& in : n.inputs) {
      if (in.node < 0 || in.node >= n.id)
        throw ValidationError("node " + std::to_string(n.id) + ": input must reference an earlier node");
      if (in.slot != 0) throw ValidationError("node " + std::to_string(n.id) + ": operators have one output");
    }
    if (const OperatorKind* k = find_builtin(n.op)) {
      const int count = static_cast<int>(n.inputs.size());
      const bool ok = k->arity_class == ArityClass::kVariadic ? count >= k->min_inputs
                                                              : count == k->min_inputs;
      if (!ok) throw ValidationError("node " + std::to_string(n.id) + ": wrong input count for " + n.op);
    }
    if (n.op == "Placeholder") {
      auto idx = param_int(n.params, "index", -1);
      if (idx < 0 || idx >= static_cast<std::int64_t>(m.input_shapes.size()) || !seen_index.insert(idx).second)
        throw ValidationError("node " + std::to_string(n.id) + ": bad placeholder index");
    }
  }
  if (seen_index.size() != m.input_shapes.size())
    throw ValidationError("input_shapes count does not match placeholder count");
}

ModelSpec lower_to_model(const Graph& expanded, std::vector<ParamSchema>* schemas) {
  Graph g = expanded;
  // Unused graph inputs carry no data flow; drop them.
  std::vector<bool> drop(g.nodes.size(), false);
  for (const auto& n : g.nodes)
    if (g.is_placeholder(n.id) && g.out_degree(n.id) == 0) drop[static_cast<std::size_t>(n.id)] = true;

  auto order = topological_order(g);
  if (!order) throw ValidationError("lower_to_model: graph has a cycle");
  std::vector<int> new_id(g.nodes.size(), -1);
  ModelSpec m;
  if (schemas) schemas->clear();
  for (int old : *order) {
    if (drop[static_cast<std::size_t>(old)]) continue;
    new_id[static_cast<std::size_t>(old)] = static_cast<int>(m.nodes.size());
    ModelNode node;
    node.id = static_cast<int>(m.nodes.size());
    const auto& blk = g.nodes[static_cast<std::size_t>(old)].block;
    if (!blk || blk->is_subgraph()) throw ValidationError("lower_to_model: graph is not expanded");
    node.op = blk->members[0];
    m.nodes.push_back(std::move(node));
    if (schemas) schemas->push_back(blk->member_params.empty() ? ParamSchema{} : blk->member_params[0]);
  }
  std::vector<Edge> edges = g.edges;
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.dst, a.dst_slot) < std::tie(b.dst, b.dst_slot);
  });
  for (const auto& e : edges) {
    int dst = new_id[static_cast<std::size_t>(e.dst)];
    int src = new_id[static_cast<std::size_t>(e.src)];
    if (dst < 0 || src < 0) continue;
    m.nodes[static_cast<std::size_t>(dst)].inputs.push_back({src, 0});
  }
  std::int64_t index = 0;
  for (auto& n : m.nodes)
    if (n.op == "Placeholder") n.params["index"] = index++;
  return m;
}

}  // namespace gfuzz
