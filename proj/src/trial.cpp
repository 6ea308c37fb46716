#include <algorithm>

#include "gfuzz/engine.hpp"
#include "gfuzz/error.hpp"

namespace gfuzz {

std::string_view status_name(Status s) {
  switch (s) {
    case Status::kMCF: return "MCF";
    case Status::kIF: return "IF";
    case Status::kDCF: return "DCF";
    case Status::kDCP: return "DCP";
  }
  return "?";
}

nlohmann::json outcome_json(const TrialOutcome& o) {
  nlohmann::json j{{"status", status_name(o.status)}, {"key", o.dedup_key}, {"re", o.re}, {"ratios", o.ratios}};
  if (o.worst_node >= 0) {
    j["node"] = o.worst_node;
    j["op"] = o.worst_op;
  }
  std::vector<std::string> culprits;
  for (Bug b : o.culprits) culprits.emplace_back(bug_name(b));
  j["culprits"] = culprits;
  if (o.failure) {
    const auto& f = *o.failure;
    j["failure"] = {{"stage", stage_name(f.stage)}, {"code", f.code}, {"kind", f.kind}, {"message", f.message}};
  }
  return j;
}

std::string structure_class(const ModelSpec& m, int node, bool fused) {
  const auto consumers = m.consumers();
  const ModelNode& n = m.nodes[static_cast<std::size_t>(node)];
  auto sole = [&](int id) { return consumers[static_cast<std::size_t>(id)].size() == 1; };
  auto input_op = [&](std::size_t k) -> const ModelNode& { return m.nodes[static_cast<std::size_t>(n.inputs[k].node)]; };
  auto strided = [](const ModelNode& c) {
    return param_int(c.params, "stride_h", 1) > 1 || param_int(c.params, "stride_w", 1) > 1;
  };
  auto padded = [&] { return param_int(n.params, "pad_h", 0) > 0 || param_int(n.params, "pad_w", 0) > 0; };

  std::string cls;
  if (n.op == "Conv2d") {
    cls = strided(n) ? "strided" : "unit-stride";
  } else if (n.op == "DepthwiseConv2d") {
    if (param_int(n.params, "dilation_h", 1) > 1 || param_int(n.params, "dilation_w", 1) > 1) cls = "dilated";
    else cls = param_int(n.params, "depth_multiplier", 1) > 1 ? "multiplier" : "unit-multiplier";
  } else if (n.op == "AvgPool" || n.op == "MaxPool") {
    cls = padded() ? "padded" : "unpadded";
  } else if (n.op == "Concat") {
    cls = n.inputs.size() > 2 ? "multi-input" : "binary";
  } else if (n.op == "Cast") {
    const auto types = infer_shapes(m);
    cls = std::string(dtype_name(types[static_cast<std::size_t>(n.inputs[0].node)].dtype)) + "->" +
          std::string(dtype_name(types[static_cast<std::size_t>(node)].dtype));
  } else if (n.op == "Relu") {
    cls = "standalone";
    if (fused && input_op(0).op == "BiasAdd" && sole(input_op(0).id)) {
      const ModelNode& bias = input_op(0);
      const ModelNode& conv = m.nodes[static_cast<std::size_t>(bias.inputs[0].node)];
      if (conv.op == "Conv2d" && sole(conv.id)) cls = strided(conv) ? "fused:Conv2d+BiasAdd,strided" : "fused:Conv2d+BiasAdd";
    }
  } else if (n.op == "Add") {
    bool with_mul = false;
    for (std::size_t k = 0; k < n.inputs.size(); ++k)
      with_mul |= fused && input_op(k).op == "Mul" && sole(input_op(k).id);
    const bool fanout = consumers[static_cast<std::size_t>(node)].size() >= 2;
    cls = with_mul ? "fused:Mul" : "plain";
    if (fanout) cls += ",fanout";
  } else if (n.op == "RealDiv") {
    cls = "elementwise";
  } else {
    cls = "in=" + std::to_string(n.inputs.size());
  }
  return n.op + "[" + cls + "]";
}

TrialOutcome run_trial(const ModelSpec& m, const TrialConfig& cfg) {
  const auto inputs = synthesize_inputs(m);
  const bool external = !cfg.engine_cmd.empty();
  const ExecResult ref = run_reference(m, inputs, !external);
  if (ref.failure) throw GenerationError("reference interpreter rejected the model: " + ref.failure->message);
  ExecResult test = external ? run_external(m, inputs, cfg.engine_cmd, cfg.timeout_s)
                             : run_optimized(m, inputs, OptimizedOptions{cfg.bugs, cfg.fuse, true});

  TrialOutcome o;
  auto attribute = [&](int node) {
    o.worst_node = node;
    if (node >= 0 && node < static_cast<int>(m.nodes.size())) o.worst_op = m.nodes[static_cast<std::size_t>(node)].op;
    auto it = test.bug_hits.find(node);
    if (it != test.bug_hits.end()) o.culprits = it->second;
  };

  if (test.failure) {
    EngineFailure& f = *test.failure;
    attribute(f.node);
    if (o.worst_op.empty()) o.worst_op = f.op;
    f.op = o.worst_op;
    o.failure = f;
    o.re = 0.0;
    if (f.stage == Stage::kConvert) {
      o.status = Status::kMCF;
      o.dedup_key = "MCF|convert|" + std::to_string(f.code) + "|" + o.worst_op;
    } else {
      o.status = Status::kIF;
      o.dedup_key = "IF|" + f.kind + "|" + std::to_string(f.code) + "|" + o.worst_op;
    }
    return o;
  }

  const ComparisonReport rep = compare(ref.outputs, test.outputs);
  o.ratios = rep.ratios;
  o.re = rep.re;
  if (rep.pass()) return o;

  o.status = Status::kDCF;
  const auto outs = m.outputs();
  int failing = -1;
  for (const auto& [id, tap] : test.taps) {
    if (success_ratio(ref.taps.at(id), tap) < 1.0) {
      failing = id;
      break;
    }
  }
  if (failing < 0 && !outs.empty()) {
    const auto worst = std::min_element(rep.ratios.begin(), rep.ratios.end()) - rep.ratios.begin();
    failing = outs[static_cast<std::size_t>(worst)];
  }
  attribute(failing);
  o.dedup_key = "DCF|" + (failing >= 0 ? structure_class(m, failing, cfg.fuse) : std::string("?"));
  return o;
}

}  // namespace gfuzz
