#include "gfuzz/shapecalc.hpp"

#include <algorithm>

#include "gfuzz/error.hpp"
#include "gfuzz/mutation.hpp"
#include "gfuzz/operators.hpp"

namespace gfuzz {

namespace {

std::string dims(const Shape& s) { return "[" + shape_string(s) + "]"; }

void require_rank4(const ModelNode& n, const TensorType& t) {
  if (t.shape.size() != 4) throw ShapeError(n.id, n.op + " expects a rank-4 input, got " + dims(t.shape));
}

void require_f32(const ModelNode& n, const TensorType& t) {
  if (t.dtype != DType::kF32)
    throw ShapeError(n.id, n.op + " expects f32, got " + std::string(dtype_name(t.dtype)));
}

std::int64_t need(const ModelNode& n, const std::string& name) {
  auto it = n.params.find(name);
  if (it == n.params.end() || !std::holds_alternative<std::int64_t>(it->second))
    throw ShapeError(n.id, n.op + " is missing integer param '" + name + "'");
  return std::get<std::int64_t>(it->second);
}

std::vector<std::int64_t> need_list(const ModelNode& n, const std::string& name, std::size_t size) {
  auto v = param_ints(n.params, name);
  if (v.size() != size) throw ShapeError(n.id, n.op + " needs a " + std::to_string(size) + "-element '" + name + "'");
  return v;
}

TensorType spatial(const ModelNode& n, const TensorType& in, std::int64_t channels, bool dilated) {
  const std::int64_t fh = need(n, "kernel_h"), fw = need(n, "kernel_w");
  const std::int64_t sh = need(n, "stride_h"), sw = need(n, "stride_w");
  const std::int64_t dh = dilated ? need(n, "dilation_h") : 1, dw = dilated ? need(n, "dilation_w") : 1;
  const std::int64_t ph = need(n, "pad_h"), pw = need(n, "pad_w");
  if (fh < 1 || fw < 1 || sh < 1 || sw < 1 || dh < 1 || dw < 1 || ph < 0 || pw < 0)
    throw ShapeError(n.id, n.op + " has a non-positive kernel, stride or dilation");
  const std::int64_t oh = conv_output_extent(in.shape[1], fh, sh, dh, ph);
  const std::int64_t ow = conv_output_extent(in.shape[2], fw, sw, dw, pw);
  if (oh < 1 || ow < 1) throw ShapeError(n.id, n.op + " window exceeds padded input " + dims(in.shape));
  return {{in.shape[0], oh, ow, channels}, DType::kF32};
}

}  // namespace

std::int64_t conv_output_extent(std::int64_t in, std::int64_t f, std::int64_t s, std::int64_t d, std::int64_t p) {
  const std::int64_t span = in + 2 * p - d * (f - 1) - 1;
  if (span < 0) return 0;
  return span / s + 1;
}

TensorType infer_node(const ModelSpec& m, const ModelNode& n, const std::vector<TensorType>& in) {
  const std::string& op = n.op;
  if (const OperatorKind* k = find_builtin(op)) {
    const int count = static_cast<int>(in.size());
    if (k->arity_class == ArityClass::kFixed ? count != k->min_inputs : count < k->min_inputs)
      throw ShapeError(n.id, op + " got " + std::to_string(count) + " inputs");
  } else {
    // Operators outside the builtin set are opaque; assume they keep the
    // first operand's type.
    if (in.empty()) throw ShapeError(n.id, op + " has no inputs");
    return in[0];
  }
  if (requires_f32(op))
    for (const auto& t : in) require_f32(n, t);

  if (op == "Placeholder") {
    const auto idx = need(n, "index");
    if (idx < 0 || idx >= static_cast<std::int64_t>(m.input_shapes.size()))
      throw ShapeError(n.id, "placeholder index out of range");
    return {m.input_shapes[static_cast<std::size_t>(idx)], DType::kF32};
  }
  if (op == "Const") {
    auto shape = param_ints(n.params, "shape");
    if (shape.empty()) throw ShapeError(n.id, "Const needs a shape");
    for (auto d : shape)
      if (d < 1) throw ShapeError(n.id, "Const shape must be positive");
    return {shape, DType::kF32};
  }
  for (const auto& t : in) require_rank4(n, t);

  if (op == "Conv2d") {
    const auto filters = need(n, "filters");
    if (filters < 1) throw ShapeError(n.id, "Conv2d needs filters >= 1");
    return spatial(n, in[0], filters, true);
  }
  if (op == "DepthwiseConv2d") {
    const auto mult = need(n, "depth_multiplier");
    if (mult < 1) throw ShapeError(n.id, "depth_multiplier must be >= 1");
    return spatial(n, in[0], in[0].shape[3] * mult, true);
  }
  if (op == "MaxPool" || op == "AvgPool") return spatial(n, in[0], in[0].shape[3], false);
  if (op == "Add" || op == "Mul" || op == "Sub" || op == "RealDiv") {
    if (in[0].shape != in[1].shape)
      throw ShapeError(n.id, op + " operands differ: " + dims(in[0].shape) + " vs " + dims(in[1].shape));
    return in[0];
  }
  if (op == "Concat") {
    const auto axis = need(n, "axis");
    if (axis < 0 || axis > 3) throw ShapeError(n.id, "Concat axis out of range");
    TensorType out = in[0];
    for (std::size_t i = 1; i < in.size(); ++i) {
      if (in[i].dtype != in[0].dtype) throw ShapeError(n.id, "Concat operands differ in dtype");
      for (std::size_t d = 0; d < 4; ++d) {
        if (static_cast<std::int64_t>(d) == axis) continue;
        if (in[i].shape[d] != in[0].shape[d])
          throw ShapeError(n.id, "Concat operands differ off-axis: " + dims(in[0].shape) + " vs " + dims(in[i].shape));
      }
      out.shape[static_cast<std::size_t>(axis)] += in[i].shape[static_cast<std::size_t>(axis)];
    }
    return out;
  }
  if (op == "Reshape") {
    auto shape = param_ints(n.params, "shape");
    if (shape.size() != 4) throw ShapeError(n.id, "Reshape needs a rank-4 target");
    for (auto d : shape)
      if (d < 1) throw ShapeError(n.id, "Reshape target must be positive");
    if (element_count(shape) != element_count(in[0].shape))
      throw ShapeError(n.id, "Reshape " + dims(in[0].shape) + " to " + dims(shape) + " changes element count");
    return {shape, in[0].dtype};
  }
  if (op == "Transpose") {
    auto perm = need_list(n, "perm", 4);
    auto sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::vector<std::int64_t>{0, 1, 2, 3}) throw ShapeError(n.id, "Transpose perm is not a permutation");
    Shape out(4);
    for (std::size_t i = 0; i < 4; ++i) out[i] = in[0].shape[static_cast<std::size_t>(perm[i])];
    return {out, in[0].dtype};
  }
  if (op == "Slice") {
    auto begin = need_list(n, "begin", 4);
    auto size = need_list(n, "size", 4);
    for (std::size_t i = 0; i < 4; ++i)
      if (begin[i] < 0 || size[i] < 1 || begin[i] + size[i] > in[0].shape[i])
        throw ShapeError(n.id, "Slice window out of bounds for " + dims(in[0].shape));
    return {size, in[0].dtype};
  }
  if (op == "Pad") {
    auto pads = need_list(n, "pads", 8);
    Shape out = in[0].shape;
    for (std::size_t i = 0; i < 4; ++i) {
      if (pads[2 * i] < 0 || pads[2 * i + 1] < 0) throw ShapeError(n.id, "Pad amounts must be non-negative");
      out[i] += pads[2 * i] + pads[2 * i + 1];
    }
    return {out, in[0].dtype};
  }
  if (op == "Cast") {
    try {
      return {in[0].shape, dtype_from_name(param_str(n.params, "to", ""))};
    } catch (const ValidationError&) {
      throw ShapeError(n.id, "Cast has an unknown target dtype");
    }
  }
  // BiasAdd, Relu, Relu6, Sigmoid, Tanh, Softmax
  return in[0];
}

std::vector<TensorType> infer_shapes(const ModelSpec& m) {
  std::vector<TensorType> types;
  types.reserve(m.nodes.size());
  for (const auto& n : m.nodes) {
    std::vector<TensorType> in;
    for (const auto& ref : n.inputs) {
      if (ref.node < 0 || ref.node >= n.id) throw ShapeError(n.id, "input references a later node");
      in.push_back(types[static_cast<std::size_t>(ref.node)]);
    }
    types.push_back(infer_node(m, n, in));
  }
  return types;
}

// ---------------------------------------------------------------------------

std::vector<AxisSolution> same_solutions(std::int64_t in, const AxisLimits& lim) {
  std::vector<AxisSolution> out;
  for (auto f = lim.kernel_lo; f <= lim.kernel_hi; ++f)
    for (auto s = lim.stride_lo; s <= lim.stride_hi; ++s)
      for (auto d = lim.dilation_lo; d <= lim.dilation_hi; ++d) {
        const std::int64_t twice = (s - 1) * in + d * (f - 1);
        if (twice % 2 != 0) continue;
        const std::int64_t p = twice / 2;
        if (p <= f) out.push_back({f, s, d, p});
      }
  return out;
}

AxisSolution solve_axis(std::int64_t in, const AxisLimits& lim, const AxisSolution& hint, Rng& rng) {
  auto all = same_solutions(in, lim);
  if (all.empty()) throw GenerationError("no SAME-preserving parameters for extent " + std::to_string(in));
  for (const auto& s : all)
    if (s.kernel == hint.kernel && s.stride == hint.stride && s.dilation == hint.dilation) return s;
  return all[rng.index(all.size())];
}

AxisLimits axis_limits(const std::string& op, const ParamSchema& schema, const std::string& axis) {
  AxisLimits lim;
  auto read = [&](const std::string& name, std::int64_t& lo, std::int64_t& hi) {
    const ParamSpec* p = find_param(schema, name + "_" + axis);
    if (!p) return false;
    if (p->domain.kind == ParamDomain::Kind::kRange) {
      lo = p->domain.low;
      hi = p->domain.high;
    } else if (p->domain.kind == ParamDomain::Kind::kEnum) {
      lo = INT64_MAX;
      hi = INT64_MIN;
      for (const auto& v : p->domain.choices)
        if (auto* i = std::get_if<std::int64_t>(&v)) {
          lo = std::min(lo, *i);
          hi = std::max(hi, *i);
        }
    }
    return true;
  };
  read("kernel", lim.kernel_lo, lim.kernel_hi);
  read("stride", lim.stride_lo, lim.stride_hi);
  if (!read("dilation", lim.dilation_lo, lim.dilation_hi) || op == "MaxPool" || op == "AvgPool")
    lim.dilation_lo = lim.dilation_hi = 1;
  lim.kernel_lo = std::max<std::int64_t>(lim.kernel_lo, 1);
  lim.stride_lo = std::max<std::int64_t>(lim.stride_lo, 1);
  lim.dilation_lo = std::max<std::int64_t>(lim.dilation_lo, 1);
  return lim;
}

ParamMap solve_same_shape_params(const Shape& input, const std::string& op, const ParamSchema& schema,
                                 ParamMap params, Rng& rng) {
  if (!is_padded_spatial(op)) throw ValidationError(op + " has no SAME-preserving parameters");
  if (input.size() != 4) throw ValidationError("solve_same_shape_params: expected NHWC input");
  const bool dilated = op == "Conv2d" || op == "DepthwiseConv2d";
  for (const auto& p : schema)
    if (p.domain.kind != ParamDomain::Kind::kShapeDependent && !params.count(p.name))
      params = pm(params, ParamSchema{p}, rng);
  for (const char* axis : {"h", "w"}) {
    const std::string a = axis;
    const auto lim = axis_limits(op, schema, a);
    AxisSolution hint{param_int(params, "kernel_" + a, 0), param_int(params, "stride_" + a, 0),
                      dilated ? param_int(params, "dilation_" + a, 0) : 1, 0};
    const auto sol = solve_axis(input[a == "h" ? 1 : 2], lim, hint, rng);
    params["kernel_" + a] = sol.kernel;
    params["stride_" + a] = sol.stride;
    if (dilated) params["dilation_" + a] = sol.dilation;
    params["pad_" + a] = sol.pad;
  }
  params["padding"] = std::string("SAME");
  return params;
}

// ---------------------------------------------------------------------------

ModelSpec compact_model(const ModelSpec& m, const std::vector<bool>& keep, const std::vector<int>& forward) {
  std::vector<int> id(m.nodes.size(), -1);
  auto resolve = [&](int x) {
    while (!keep[static_cast<std::size_t>(x)]) x = forward[static_cast<std::size_t>(x)];
    return id[static_cast<std::size_t>(x)];
  };
  ModelSpec out;
  out.input_shapes = m.input_shapes;
  out.weights_seed = m.weights_seed;
  for (const auto& n : m.nodes) {
    if (!keep[static_cast<std::size_t>(n.id)]) continue;
    ModelNode copy = n;
    copy.id = static_cast<int>(out.nodes.size());
    for (auto& ref : copy.inputs) ref.node = resolve(ref.node);
    id[static_cast<std::size_t>(n.id)] = copy.id;
    out.nodes.push_back(std::move(copy));
  }
  return out;
}

std::int64_t estimate_macs(const ModelSpec& m, const std::vector<TensorType>& types) {
  std::int64_t macs = 0;
  for (const auto& n : m.nodes) {
    if (!is_padded_spatial(n.op)) continue;
    const auto& out = types[static_cast<std::size_t>(n.id)];
    std::int64_t window = param_int(n.params, "kernel_h", 1) * param_int(n.params, "kernel_w", 1);
    if (n.op == "Conv2d") window *= types[static_cast<std::size_t>(n.inputs[0].node)].shape[3];
    macs += element_count(out.shape) * window;
  }
  return macs;
}

namespace {

struct Builder {
  ModelSpec out;
  std::vector<TensorType> types;

  int add(ModelNode n) {
    n.id = static_cast<int>(out.nodes.size());
    std::vector<TensorType> in;
    for (const auto& ref : n.inputs) in.push_back(types[static_cast<std::size_t>(ref.node)]);
    try {
      types.push_back(infer_node(out, n, in));
    } catch (const ShapeError& e) {
      throw GenerationError(std::string("shape calculation: ") + e.what());
    }
    out.nodes.push_back(std::move(n));
    return out.nodes.back().id;
  }

  int cast(int src, DType to) {
    ModelNode c;
    c.op = "Cast";
    c.params["to"] = std::string(dtype_name(to));
    c.inputs = {{src, 0}};
    return add(std::move(c));
  }
};

// Reshape targets with the same element count.
std::vector<Shape> reshape_candidates(const Shape& s) {
  const auto n = s[0], h = s[1], w = s[2], c = s[3];
  std::vector<Shape> out{{n, h, w, c}, {n, w, h, c}, {n, h * w, 1, c}, {n, 1, h * w, c}, {n, h, w * c, 1}};
  if (c % 2 == 0) out.push_back({n, h * 2, w, c / 2});
  if (h % 2 == 0) out.push_back({n, h / 2, w, c * 2});
  return out;
}

void fill_shape_dependent(ModelNode& n, const ParamSchema& schema, const std::vector<TensorType>& in,
                          const ModelSpec& m, Rng& rng) {
  const std::string& op = n.op;
  if (is_padded_spatial(op)) {
    n.params = solve_same_shape_params(in[0].shape, op, schema, n.params, rng);
  } else if (op == "Const") {
    n.params["shape"] = m.input_shapes.empty() ? Shape{1, 8, 8, 3} : m.input_shapes[0];
  } else if (op == "Reshape") {
    auto c = reshape_candidates(in[0].shape);
    n.params["shape"] = c[rng.index(c.size())];
  } else if (op == "Slice") {
    std::vector<std::int64_t> begin(4, 0), size = in[0].shape;
    for (std::size_t d = 1; d <= 2; ++d) {
      const auto extent = in[0].shape[d];
      size[d] = rng.uniform_int(std::max<std::int64_t>(1, extent / 2), extent);
      begin[d] = rng.uniform_int(0, extent - size[d]);
    }
    n.params["begin"] = begin;
    n.params["size"] = size;
  } else if (op == "Pad") {
    std::vector<std::int64_t> pads(8, 0);
    const bool symmetric = rng.bernoulli(0.5);
    for (std::size_t d = 1; d <= 2; ++d) {
      pads[2 * d] = rng.uniform_int(0, 2);
      pads[2 * d + 1] = symmetric ? pads[2 * d] : rng.uniform_int(0, 2);
    }
    n.params["pads"] = pads;
  }
}

// Makes every operand of an aggregation agree (off-axis for Concat) by
// slicing down to the smallest or padding up to the largest extent.
void equalize_operands(Builder& b, ModelNode& n, Rng& rng) {
  const bool concat = n.op == "Concat";
  const std::int64_t axis = concat ? param_int(n.params, "axis", -1) : -1;
  auto type = [&](const PortRef& r) -> const TensorType& { return b.types[static_cast<std::size_t>(r.node)]; };

  if (concat) {
    bool mixed = false;
    for (const auto& r : n.inputs) mixed |= type(r).dtype != type(n.inputs[0]).dtype;
    if (mixed)
      for (auto& r : n.inputs)
        if (type(r).dtype != DType::kF32) r.node = b.cast(r.node, DType::kF32);
  }
  for (const auto& r : n.inputs)
    if (type(r).shape.size() != 4) throw GenerationError("aggregation operand is not rank 4");

  bool mismatch = false;
  for (const auto& r : n.inputs)
    for (std::size_t d = 0; d < 4; ++d)
      if (static_cast<std::int64_t>(d) != axis && type(r).shape[d] != type(n.inputs[0]).shape[d]) mismatch = true;
  if (!mismatch) return;

  const bool to_min = rng.bernoulli(0.5);
  Shape target = type(n.inputs[0]).shape;
  for (const auto& r : n.inputs)
    for (std::size_t d = 0; d < 4; ++d)
      target[d] = to_min ? std::min(target[d], type(r).shape[d]) : std::max(target[d], type(r).shape[d]);

  for (auto& r : n.inputs) {
    const Shape have = type(r).shape;
    bool differs = false;
    for (std::size_t d = 0; d < 4; ++d) differs |= static_cast<std::int64_t>(d) != axis && have[d] != target[d];
    if (!differs) continue;
    ModelNode adapter;
    adapter.inputs = {{r.node, 0}};
    if (to_min) {
      std::vector<std::int64_t> begin(4, 0), size = have;
      for (std::size_t d = 0; d < 4; ++d) {
        if (static_cast<std::int64_t>(d) == axis || have[d] == target[d]) continue;
        size[d] = target[d];
        begin[d] = rng.uniform_int(0, have[d] - target[d]);
      }
      adapter.op = "Slice";
      adapter.params["begin"] = begin;
      adapter.params["size"] = size;
    } else {
      std::vector<std::int64_t> pads(8, 0);
      for (std::size_t d = 0; d < 4; ++d) {
        if (static_cast<std::int64_t>(d) == axis) continue;
        const auto diff = target[d] - have[d];
        pads[2 * d] = diff / 2;
        pads[2 * d + 1] = diff - diff / 2;
      }
      adapter.op = "Pad";
      adapter.params["pads"] = pads;
    }
    r.node = b.add(std::move(adapter));
  }
}

ModelSpec run_pass(const ModelSpec& m, const std::vector<ParamSchema>& schemas, const ShapeCalcOptions& opt,
                   Rng& rng) {
  Builder b;
  b.out.input_shapes = m.input_shapes;
  b.out.weights_seed = m.weights_seed;
  std::vector<int> remap(m.nodes.size(), -1);
  for (const auto& old : m.nodes) {
    ModelNode n = old;
    for (auto& r : n.inputs) r.node = remap[static_cast<std::size_t>(r.node)];
    const ParamSchema schema =
        old.id < static_cast<int>(schemas.size()) ? schemas[static_cast<std::size_t>(old.id)] : default_schema(n.op);

    if (!opt.keep_params && n.op != "Placeholder") {
      ParamMap fresh = opt.sample_params ? pm({}, schema, rng) : default_params(schema);
      n.params = std::move(fresh);
    }
    if (requires_f32(n.op))
      for (auto& r : n.inputs)
        if (b.types[static_cast<std::size_t>(r.node)].dtype != DType::kF32) r.node = b.cast(r.node, DType::kF32);
    if (is_aggregation(n.op)) equalize_operands(b, n, rng);
    if (!opt.keep_params) {
      std::vector<TensorType> in;
      for (const auto& r : n.inputs) in.push_back(b.types[static_cast<std::size_t>(r.node)]);
      fill_shape_dependent(n, schema, in, b.out, rng);
    }
    remap[static_cast<std::size_t>(old.id)] = b.add(std::move(n));
    const auto elements = element_count(b.types.back().shape);
    if (elements > opt.max_elements)
      throw GenerationError("tensor of " + std::to_string(elements) + " elements exceeds the size limit");
  }
  if (estimate_macs(b.out, b.types) > opt.max_macs) throw GenerationError("model exceeds the compute limit");
  return b.out;
}

}  // namespace

ModelSpec calc_shapes_and_params(const ModelSpec& m, const std::vector<ParamSchema>& schemas,
                                 const ShapeCalcOptions& options, Rng& rng) {
  if (m.input_shapes.size() != m.placeholders().size())
    throw ValidationError("calc_shapes_and_params: input_shapes must cover every placeholder");
  ModelSpec out = run_pass(m, schemas, options, rng);
  if (options.merge_pads) out = merge_pads(out);
  try {
    infer_shapes(out);
  } catch (const ShapeError& e) {
    throw GenerationError(std::string("resolved model fails inference: ") + e.what());
  }
  return out;
}

ModelSpec insert_aggregation_adapters(const ModelSpec& m, Rng& rng) {
  ShapeCalcOptions opt;
  opt.keep_params = true;
  opt.max_elements = INT64_MAX;
  opt.max_macs = INT64_MAX;
  return run_pass(m, {}, opt, rng);
}

ModelSpec merge_pads(const ModelSpec& m) {
  ModelSpec cur = m;
  for (bool changed = true; changed;) {
    changed = false;
    const auto consumers = cur.consumers();
    std::vector<bool> keep(cur.nodes.size(), true);
    std::vector<int> forward(cur.nodes.size(), -1);
    for (const auto& pad : cur.nodes) {
      if (pad.op != "Pad" || consumers[static_cast<std::size_t>(pad.id)].size() != 1) continue;
      auto& user = cur.nodes[static_cast<std::size_t>(consumers[static_cast<std::size_t>(pad.id)][0].node)];
      const auto pads = param_ints(pad.params, "pads");
      if (pads.size() != 8) continue;
      if (user.op == "Pad") {
        auto sum = param_ints(user.params, "pads");
        if (sum.size() != 8) continue;
        for (std::size_t i = 0; i < 8; ++i) sum[i] += pads[i];
        user.params["pads"] = sum;
      } else if (user.op == "Conv2d" || user.op == "DepthwiseConv2d") {
        if (pads[0] || pads[1] || pads[6] || pads[7] || pads[2] != pads[3] || pads[4] != pads[5]) continue;
        const auto ph = param_int(user.params, "pad_h", 0) + pads[2];
        const auto pw = param_int(user.params, "pad_w", 0) + pads[4];
        if (ph > param_int(user.params, "kernel_h", 0) || pw > param_int(user.params, "kernel_w", 0)) continue;
        user.params["pad_h"] = ph;
        user.params["pad_w"] = pw;
      } else {
        continue;
      }
      keep[static_cast<std::size_t>(pad.id)] = false;
      forward[static_cast<std::size_t>(pad.id)] = pad.inputs[0].node;
      changed = true;
      break;  // consumers are stale after one fold
    }
    if (changed) cur = compact_model(cur, keep, forward);
  }
  return cur;
}

}  // namespace gfuzz
