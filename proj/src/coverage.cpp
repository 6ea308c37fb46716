#include "gfuzz/coverage.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "gfuzz/error.hpp"
#include "gfuzz/operators.hpp"
#include "gfuzz/shapecalc.hpp"

namespace gfuzz {

void CoverageConfig::validate() const {
  if (n_maxspc < 1) throw ConfigError("coverage: n_maxspc must be >= 1");
  for (const auto* w : {&weights_op, &weights_set}) {
    double sum = 0;
    for (double x : *w) {
      if (x < 0) throw ConfigError("coverage: weights must be non-negative");
      sum += x;
    }
    if (sum <= 0) throw ConfigError("coverage: weights must have a positive sum");
  }
}

std::string sp_vector(const ModelNode& node, const std::vector<std::string>& input_types) {
  std::string out;
  for (std::size_t i = 0; i < input_types.size(); ++i) {
    if (i) out += ';';
    out += input_types[i];
  }
  out += '|';
  bool first = true;
  for (const auto& [k, v] : node.params) {
    if (node.op == "Placeholder" && k == "index") continue;
    if (!first) out += ',';
    first = false;
    out += k + "=" + param_string(v);
  }
  return out;
}

CoverageState::CoverageState(const BlockCorpus& corpus, CoverageConfig config) : config_(config) {
  config_.validate();
  types_ = corpus.operator_types();
  for (const auto& op : types_) {
    in_range_[op];
    out_range_[op];
    obs_[op];
  }
  // Single-operator blocks declare the ranges directly.
  std::set<std::string> declared;
  for (const auto& b : corpus.blocks) {
    if (b.is_subgraph()) continue;
    const auto& op = b.members[0];
    in_range_[op].insert(b.in_degree.begin(), b.in_degree.end());
    out_range_[op].insert(b.out_degree.begin(), b.out_degree.end());
    declared.insert(op);
  }
  // Operators that only occur inside subgraphs: in-degree is the member's
  // arity (or every count a containing block can realize for variadic
  // members), out-degree the containing blocks' range plus inner fan-out.
  for (const auto& b : corpus.blocks) {
    if (!b.is_subgraph()) continue;
    for (std::size_t m = 0; m < b.members.size(); ++m) {
      const auto& op = b.members[m];
      if (declared.count(op)) continue;
      int inner_in = 0, inner_out = 0;
      for (const auto& e : b.inner_edges) {
        inner_in += e.dst == static_cast<int>(m);
        inner_out += e.src == static_cast<int>(m);
      }
      if (is_variadic(op)) {
        for (int d : b.in_degree) in_range_[op].insert(std::max(inner_in + d, min_inputs(op)));
        in_range_[op].insert(std::max(inner_in, min_inputs(op)));
      } else {
        in_range_[op].insert(min_inputs(op));
      }
      if (inner_out > 0) out_range_[op].insert(inner_out);
      else out_range_[op].insert(b.out_degree.begin(), b.out_degree.end());
    }
  }
}

void CoverageState::observe(const ModelSpec& m) {
  const auto types = infer_shapes(m);
  const auto consumers = m.consumers();
  for (const auto& n : m.nodes) {
    auto it = obs_.find(n.op);
    OperatorObservation& o = it != obs_.end() ? it->second : foreign_[n.op];
    o.seen = true;
    o.in_degrees.insert(static_cast<int>(n.inputs.size()));
    o.out_degrees.insert(static_cast<int>(consumers[static_cast<std::size_t>(n.id)].size()));
    for (const auto& c : consumers[static_cast<std::size_t>(n.id)])
      o.successors.insert(m.nodes[static_cast<std::size_t>(c.node)].op);
    std::vector<std::string> in;
    for (const auto& ref : n.inputs) {
      const auto& t = types[static_cast<std::size_t>(ref.node)];
      in.push_back(shape_string(t.shape) + ":" + std::string(dtype_name(t.dtype)));
    }
    o.sp_vectors.insert(sp_vector(n, in));
  }
}

void CoverageState::merge(const CoverageState& other) {
  if (other.types_ != types_) throw ValidationError("coverage merge across different corpora");
  auto fold = [](std::map<std::string, OperatorObservation>& into, const std::map<std::string, OperatorObservation>& from) {
    for (const auto& [op, o] : from) {
      auto& dst = into[op];
      dst.seen |= o.seen;
      dst.in_degrees.insert(o.in_degrees.begin(), o.in_degrees.end());
      dst.out_degrees.insert(o.out_degrees.begin(), o.out_degrees.end());
      dst.successors.insert(o.successors.begin(), o.successors.end());
      dst.sp_vectors.insert(o.sp_vectors.begin(), o.sp_vectors.end());
    }
  };
  fold(obs_, other.obs_);
  fold(foreign_, other.foreign_);
}

namespace {

double ratio_in(const std::set<int>& seen, const std::set<int>& range) {
  if (range.empty()) return 0.0;
  std::size_t hit = 0;
  for (int d : seen) hit += range.count(d);
  return static_cast<double>(hit) / static_cast<double>(range.size());
}

double weighted(const std::array<double, 5>& w, const std::array<double, 5>& m) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    num += w[i] * m[i];
    den += w[i];
  }
  return num / den;
}

}  // namespace

MetricRow CoverageState::op_metrics(const std::string& op) const {
  MetricRow r;
  auto it = obs_.find(op);
  if (it == obs_.end() || types_.empty()) return r;
  const auto& o = it->second;
  const double nt = static_cast<double>(types_.size());
  r.otc = o.seen ? 1.0 : 0.0;
  r.idc = ratio_in(o.in_degrees, in_range_.at(op));
  r.odc = ratio_in(o.out_degrees, out_range_.at(op));
  std::size_t succ = 0;
  for (const auto& s : o.successors) succ += obs_.count(s);
  r.sec = static_cast<double>(succ) / nt;
  r.spc = static_cast<double>(std::min<std::size_t>(o.sp_vectors.size(), static_cast<std::size_t>(config_.n_maxspc))) /
          static_cast<double>(config_.n_maxspc);
  r.olc = weighted(config_.weights_op, {r.otc, r.idc, r.odc, r.sec, r.spc});
  return r;
}

MetricRow CoverageState::set_metrics() const {
  MetricRow r;
  if (types_.empty()) return r;
  for (const auto& op : types_) {
    const auto row = op_metrics(op);
    r.otc += row.otc;
    r.idc += row.idc;
    r.odc += row.odc;
    r.sec += row.sec;
    r.spc += row.spc;
  }
  const double nt = static_cast<double>(types_.size());
  r.otc /= nt;
  r.idc /= nt;
  r.odc /= nt;
  r.sec /= nt;
  r.spc /= nt;
  r.olc = weighted(config_.weights_set, {r.otc, r.idc, r.odc, r.sec, r.spc});
  return r;
}

bool CoverageState::is_new_coverage(const std::vector<ModelSpec>& batch) const {
  CoverageState next = *this;
  for (const auto& m : batch) next.observe(m);
  constexpr double kEps = 1e-12;
  if (config_.gate != CoverageGate::kOperatorOnly && next.olc() > olc() + kEps) return true;
  if (config_.gate == CoverageGate::kSetOnly) return false;
  for (const auto& op : types_)
    if (next.olc_op(op) > olc_op(op) + kEps) return true;
  return false;
}

std::string coverage_table(const CoverageState& s) {
  std::string out = "Object            OTC     IDC     ODC     SEC     SPC     OLC\n";
  auto line = [&](const std::string& name, const MetricRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %6.1f%% %6.1f%% %6.1f%% %6.1f%% %6.1f%% %6.1f%%\n", name.c_str(),
                  100 * r.otc, 100 * r.idc, 100 * r.odc, 100 * r.sec, 100 * r.spc, 100 * r.olc);
    out += buf;
  };
  for (const auto& op : s.operator_types()) line(op, s.op_metrics(op));
  line("I", s.set_metrics());
  return out;
}

std::string coverage_json(const CoverageState& s) {
  using nlohmann::json;
  auto row = [](const MetricRow& r) {
    return json{{"otc", r.otc}, {"idc", r.idc}, {"odc", r.odc}, {"sec", r.sec}, {"spc", r.spc}, {"olc", r.olc}};
  };
  json ops = json::object();
  for (const auto& op : s.operator_types()) {
    const auto& o = s.observations().at(op);
    json e = row(s.op_metrics(op));
    e["in_degrees"] = o.in_degrees;
    e["out_degrees"] = o.out_degrees;
    e["successors"] = o.successors;
    e["sp_vector_count"] = o.sp_vectors.size();
    ops[op] = e;
  }
  json foreign = json::object();
  for (const auto& [op, o] : s.foreign()) foreign[op] = json{{"sp_vector_count", o.sp_vectors.size()}};
  return json{{"operators", ops}, {"set", row(s.set_metrics())}, {"foreign", foreign}}.dump(1) + "\n";
}

}  // namespace gfuzz
