#include "gfuzz/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gfuzz/error.hpp"
#include "gfuzz/operators.hpp"

namespace gfuzz {

using nlohmann::json;

namespace {

ParamValue param_from_json(const json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<std::int64_t> out;
    for (const auto& v : j) {
      if (!v.is_number_integer()) throw ParseError(where + ": list params must hold integers");
      out.push_back(v.get<std::int64_t>());
    }
    return out;
  }
  throw ParseError(where + ": unsupported param value");
}

json param_to_json(const ParamValue& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<std::vector<std::int64_t>>(v);
}

ParamDomain domain_from_json(const json& j, const std::string& where) {
  if (j.is_string() && j.get<std::string>() == "shape") return ParamDomain::shape_dependent();
  if (j.is_object() && j.contains("enum")) {
    std::vector<ParamValue> values;
    for (const auto& v : j.at("enum")) values.push_back(param_from_json(v, where));
    return ParamDomain::enumeration(std::move(values));
  }
  if (j.is_object() && j.contains("range")) {
    const auto& r = j.at("range");
    if (!r.is_array() || r.size() != 2) throw ParseError(where + ": range needs [low, high]");
    return ParamDomain::range(r[0].get<std::int64_t>(), r[1].get<std::int64_t>());
  }
  throw ParseError(where + ": domain must be \"shape\", {\"enum\": [...]} or {\"range\": [lo, hi]}");
}

json domain_to_json(const ParamDomain& d) {
  switch (d.kind) {
    case ParamDomain::Kind::kShapeDependent: return "shape";
    case ParamDomain::Kind::kRange: return json{{"range", {d.low, d.high}}};
    case ParamDomain::Kind::kEnum: {
      json arr = json::array();
      for (const auto& v : d.choices) arr.push_back(param_to_json(v));
      return json{{"enum", arr}};
    }
  }
  return nullptr;
}

std::set<int> int_set(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " must be an array");
  std::set<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw ParseError(where + " must hold integers");
    out.insert(v.get<int>());
  }
  return out;
}

Block block_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("block entries must be objects");
  Block b;
  try {
    b.name = j.at("name").get<std::string>();
    for (const auto& m : j.at("members")) b.members.push_back(m.get<std::string>());
    if (j.contains("inner_edges")) {
      for (const auto& e : j.at("inner_edges")) {
        if (!e.is_array() || e.size() != 2) throw ParseError("block '" + b.name + "': inner edge must be [src, dst]");
        b.inner_edges.push_back({e[0].get<int>(), e[1].get<int>()});
      }
    }
    b.in_degree = int_set(j.at("in_degree"), "block '" + b.name + "': in_degree");
    b.out_degree = int_set(j.at("out_degree"), "block '" + b.name + "': out_degree");
  } catch (const json::exception& e) {
    throw ParseError(std::string("corpus block: ") + e.what());
  }
  b.kind = b.members.size() > 1 || !b.inner_edges.empty() ? BlockKind::kSubgraph : BlockKind::kOperator;
  for (const auto& m : b.members) b.member_params.push_back(default_schema(m));
  if (j.contains("params")) {
    const auto& params = j.at("params");
    if (!params.is_array() || params.size() != b.members.size())
      throw ParseError("block '" + b.name + "': params must be an array with one object per member");
    for (std::size_t m = 0; m < b.members.size(); ++m) {
      if (!params[m].is_object()) throw ParseError("block '" + b.name + "': params entries must be objects");
      for (const auto& [name, dom] : params[m].items()) {
        ParamSpec spec{name, domain_from_json(dom, "block '" + b.name + "' param '" + name + "'")};
        auto& schema = b.member_params[m];
        auto it = std::find_if(schema.begin(), schema.end(), [&](const ParamSpec& p) { return p.name == name; });
        if (it != schema.end()) *it = std::move(spec);
        else schema.push_back(std::move(spec));
      }
    }
  }
  return b;
}

}  // namespace

BlockCorpus parse_corpus(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("corpus: ") + e.what());
  }
  if (!j.is_object() || !j.contains("blocks") || !j.at("blocks").is_array())
    throw ParseError("corpus: top-level object needs a 'blocks' array");
  BlockCorpus corpus;
  for (const auto& entry : j.at("blocks")) corpus.blocks.push_back(block_from_json(entry));
  corpus.validate();
  return corpus;
}

BlockCorpus load_corpus(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ParseError("corpus file not found: " + path.string());
  return parse_corpus(read_file(path));
}

std::string corpus_to_json(const BlockCorpus& corpus) {
  json blocks = json::array();
  for (const auto& b : corpus.blocks) {
    json e;
    e["name"] = b.name;
    e["members"] = b.members;
    json edges = json::array();
    for (const auto& ie : b.inner_edges) edges.push_back({ie.src, ie.dst});
    e["inner_edges"] = edges;
    e["in_degree"] = std::vector<int>(b.in_degree.begin(), b.in_degree.end());
    e["out_degree"] = std::vector<int>(b.out_degree.begin(), b.out_degree.end());
    json params = json::array();
    for (const auto& schema : b.member_params) {
      json obj = json::object();
      for (const auto& p : schema) obj[p.name] = domain_to_json(p.domain);
      params.push_back(obj);
    }
    e["params"] = params;
    blocks.push_back(e);
  }
  return json{{"blocks", blocks}}.dump(1);
}

// ---------------------------------------------------------------------------

std::string serialize_model(const ModelSpec& m) {
  json nodes = json::array();
  for (const auto& n : m.nodes) {
    json node;
    node["id"] = n.id;
    node["op"] = n.op;
    json params = json::object();
    for (const auto& [k, v] : n.params) params[k] = param_to_json(v);
    node["params"] = params;
    json inputs = json::array();
    for (const auto& in : n.inputs) inputs.push_back({in.node, in.slot});
    node["inputs"] = inputs;
    nodes.push_back(node);
  }
  json shapes = json::array();
  for (const auto& s : m.input_shapes) shapes.push_back(s);
  json root;
  root["nodes"] = nodes;
  root["inputs"] = shapes;
  root["weights_seed"] = m.weights_seed;
  return root.dump() + "\n";
}

ModelSpec deserialize_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  ModelSpec m;
  try {
    for (const auto& node : j.at("nodes")) {
      ModelNode n;
      n.id = node.at("id").get<int>();
      n.op = node.at("op").get<std::string>();
      for (const auto& [k, v] : node.at("params").items())
        n.params[k] = param_from_json(v, "node " + std::to_string(n.id) + " param '" + k + "'");
      for (const auto& in : node.at("inputs")) {
        if (!in.is_array() || in.size() != 2) throw ParseError("model: input refs must be [node, slot]");
        n.inputs.push_back({in[0].get<int>(), in[1].get<int>()});
      }
      m.nodes.push_back(std::move(n));
    }
    for (const auto& s : j.at("inputs")) m.input_shapes.push_back(s.get<Shape>());
    const auto& seed = j.at("weights_seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      throw ParseError("model: weights_seed must be an unsigned integer");
    m.weights_seed = seed.get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  validate_model_structure(m);
  return m;
}

ModelSpec load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

void save_model(const ModelSpec& m, const std::filesystem::path& path) { write_file(path, serialize_model(m)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InfraError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InfraError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw InfraError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InfraError("rename " + tmp.string() + ": " + ec.message());
}

}  // namespace gfuzz
