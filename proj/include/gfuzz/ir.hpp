#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gfuzz {

using Shape = std::vector<std::int64_t>;

enum class DType : std::uint8_t { kF32 = 0, kI32 = 1, kI8 = 2 };

std::string_view dtype_name(DType t);
DType dtype_from_name(std::string_view name);

std::int64_t element_count(const Shape& s);
std::string shape_string(const Shape& s);

// ---------------------------------------------------------------------------
// Parameters

using ParamValue = std::variant<std::int64_t, std::string, std::vector<std::int64_t>>;
using ParamMap = std::map<std::string, ParamValue>;

std::string param_string(const ParamValue& v);
std::int64_t param_int(const ParamMap& p, const std::string& name, std::int64_t fallback);
std::vector<std::int64_t> param_ints(const ParamMap& p, const std::string& name);
std::string param_str(const ParamMap& p, const std::string& name, const std::string& fallback);

struct ParamDomain {
  enum class Kind { kEnum, kRange, kShapeDependent };

  Kind kind = Kind::kShapeDependent;
  std::vector<ParamValue> choices;  // kEnum
  std::int64_t low = 0;             // kRange
  std::int64_t high = 0;            // kRange

  static ParamDomain enumeration(std::vector<ParamValue> values);
  static ParamDomain range(std::int64_t lo, std::int64_t hi);
  static ParamDomain shape_dependent();

  bool contains(const ParamValue& v) const;
  friend bool operator==(const ParamDomain&, const ParamDomain&) = default;
};

struct ParamSpec {
  std::string name;
  ParamDomain domain;
  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

using ParamSchema = std::vector<ParamSpec>;

const ParamSpec* find_param(const ParamSchema& schema, std::string_view name);

// ---------------------------------------------------------------------------
// Operators

enum class ArityClass { kFixed, kVariadic };

struct OperatorKind {
  std::string name;
  ArityClass arity_class = ArityClass::kFixed;
  int min_inputs = 1;
  int max_inputs = 1;  // ignored when variadic
  ParamSchema params;
};

// ---------------------------------------------------------------------------
// Blocks

enum class BlockKind { kOperator, kSubgraph };

struct InnerEdge {
  int src = 0;
  int dst = 0;
  friend bool operator==(const InnerEdge&, const InnerEdge&) = default;
};

struct Block {
  std::string name;
  BlockKind kind = BlockKind::kOperator;
  std::vector<std::string> members;
  // Order matters: a member's inner inputs occupy its leading input slots in
  // the order they appear here. Repeated pairs are parallel data flows.
  std::vector<InnerEdge> inner_edges;
  std::set<int> in_degree;
  std::set<int> out_degree;
  std::vector<ParamSchema> member_params;  // one schema per member

  bool is_subgraph() const { return kind == BlockKind::kSubgraph; }
  bool contains_operator(std::string_view op) const;
  friend bool operator==(const Block&, const Block&) = default;
};

// Throws ValidationError when a block breaks its structural invariants.
void validate_block(const Block& b);

// Members without inner out-edges, in member order. Slot i of the block's
// output is sinks[i].
std::vector<int> block_sinks(const Block& b);

Block placeholder_block();
Block single_operator_block(const std::string& op);

struct BlockCorpus {
  std::vector<Block> blocks;

  // Distinct operator names in order of first appearance.
  std::vector<std::string> operator_types() const;
  std::optional<std::size_t> find(std::string_view name) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Block-level graph

// External input `slot` of the block instance feeds `member`. Bound inputs
// follow the member's inner inputs.
struct InputBinding {
  int member = 0;
  int slot = 0;
  friend bool operator==(const InputBinding&, const InputBinding&) = default;
};

struct GraphNode {
  int id = 0;
  std::optional<Block> block;
  // Empty means "derive from the block for the realized in-degree".
  std::vector<InputBinding> bindings;
};

struct Edge {
  int src = 0;
  int src_slot = 0;
  int dst = 0;
  int dst_slot = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Graph {
  std::vector<GraphNode> nodes;  // nodes[i].id == i
  std::vector<Edge> edges;

  int add_node(std::optional<Block> block = std::nullopt);
  void add_edge(int src, int dst);
  void remove_edge(std::size_t edge_index);

  int in_degree(int node) const;
  int out_degree(int node) const;
  bool is_placeholder(int node) const;
  // Nodes that are not injected graph inputs (the generator's block count).
  std::size_t node_count() const;

  // Renumber destination slots so each node's inputs are 0..d-1 in their
  // current relative order.
  void normalize_slots();
};

std::optional<std::vector<int>> topological_order(const Graph& g);
bool is_acyclic(const Graph& g);

// Default external-input wiring of `block` at realized in-degree `degree`.
std::vector<InputBinding> default_bindings(const Block& block, int degree);
bool can_absorb(const Block& block, int degree);
// Every slot in [0, degree) is used and each member receives exactly its
// arity (at least its minimum for variadic and non-builtin operators).
bool bindings_valid(const Block& block, const std::vector<InputBinding>& bindings, int degree);
// Bindings in effect for `node` at `degree`: explicit ones, else defaults.
std::vector<InputBinding> effective_bindings(const GraphNode& node, int degree);

// Replaces subgraph nodes by their members. The result contains only
// single-operator blocks.
Graph expand_blocks(const Graph& g);

// ---------------------------------------------------------------------------
// Operator-level model

struct PortRef {
  int node = 0;
  int slot = 0;
  friend bool operator==(const PortRef&, const PortRef&) = default;
};

struct ModelNode {
  int id = 0;
  std::string op;
  ParamMap params;
  std::vector<PortRef> inputs;
  friend bool operator==(const ModelNode&, const ModelNode&) = default;
};

// Nodes are dense (nodes[i].id == i) and topologically ordered: every input
// refers to a smaller id. Placeholder nodes carry an "index" param selecting
// their entry in input_shapes.
struct ModelSpec {
  std::vector<ModelNode> nodes;
  std::vector<Shape> input_shapes;
  std::uint64_t weights_seed = 0;

  std::vector<std::vector<PortRef>> consumers() const;
  // Nodes without consumers, ascending id. These are the graph outputs.
  std::vector<int> outputs() const;
  std::vector<int> placeholders() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void validate_model_structure(const ModelSpec& m);

// Expanded graph (single-operator blocks only) to a model skeleton without
// parameters. Placeholders get consecutive "index" params; input_shapes is
// left for the caller. When `schemas` is given it receives each model node's
// param schema (corpus overrides included).
ModelSpec lower_to_model(const Graph& expanded, std::vector<ParamSchema>* schemas = nullptr);

}  // namespace gfuzz
