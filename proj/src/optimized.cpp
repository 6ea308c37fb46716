#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string_view>

#include "gfuzz/error.hpp"
#include "gfuzz/interp.hpp"
#include "gfuzz/operators.hpp"
#include "gfuzz/shapecalc.hpp"
#include "kernels.hpp"

namespace gfuzz {

namespace {

// NCHW tensor. Only rank-4 tensors flow through this backend.
struct Planar {
  std::array<std::int64_t, 4> dim{};  // N, C, H, W
  DType dtype = DType::kF32;
  std::vector<float> f;
  std::vector<std::int32_t> i;

  std::int64_t plane() const { return dim[2] * dim[3]; }
  std::size_t count() const { return static_cast<std::size_t>(dim[0] * dim[1] * dim[2] * dim[3]); }
  std::size_t idx(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return static_cast<std::size_t>(((n * dim[1] + c) * dim[2] + h) * dim[3] + w);
  }
};

struct Abort {
  EngineFailure failure;
};

Planar make(std::array<std::int64_t, 4> dim, DType dtype) {
  Planar p;
  p.dim = dim;
  p.dtype = dtype;
  if (dtype == DType::kF32) p.f.assign(p.count(), 0.0f);
  else p.i.assign(p.count(), 0);
  return p;
}

// NHWC extents to NCHW extents.
std::array<std::int64_t, 4> planar_dims(const Shape& s) { return {s[0], s[3], s[1], s[2]}; }

Planar from_nhwc(const Tensor& t) {
  Planar p = make(planar_dims(t.shape), t.dtype);
  std::size_t k = 0;
  for (std::int64_t n = 0; n < t.shape[0]; ++n)
    for (std::int64_t h = 0; h < t.shape[1]; ++h)
      for (std::int64_t w = 0; w < t.shape[2]; ++w)
        for (std::int64_t c = 0; c < t.shape[3]; ++c, ++k) {
          if (p.dtype == DType::kF32) p.f[p.idx(n, c, h, w)] = t.f[k];
          else p.i[p.idx(n, c, h, w)] = t.i[k];
        }
  return p;
}

Tensor to_nhwc(const Planar& p) {
  Tensor t = Tensor::zeros({p.dim[0], p.dim[2], p.dim[3], p.dim[1]}, p.dtype);
  std::size_t k = 0;
  for (std::int64_t n = 0; n < p.dim[0]; ++n)
    for (std::int64_t h = 0; h < p.dim[2]; ++h)
      for (std::int64_t w = 0; w < p.dim[3]; ++w)
        for (std::int64_t c = 0; c < p.dim[1]; ++c, ++k) {
          if (p.dtype == DType::kF32) t.f[k] = p.f[p.idx(n, c, h, w)];
          else t.i[k] = p.i[p.idx(n, c, h, w)];
        }
  return t;
}

// NHWC axis → NCHW axis.
constexpr std::size_t kAxis[4] = {0, 2, 3, 1};

struct Window {
  std::int64_t fh, fw, sh, sw, dh, dw, ph, pw;
  explicit Window(const ModelNode& n)
      : fh(param_int(n.params, "kernel_h", 1)),
        fw(param_int(n.params, "kernel_w", 1)),
        sh(param_int(n.params, "stride_h", 1)),
        sw(param_int(n.params, "stride_w", 1)),
        dh(param_int(n.params, "dilation_h", 1)),
        dw(param_int(n.params, "dilation_w", 1)),
        ph(param_int(n.params, "pad_h", 0)),
        pw(param_int(n.params, "pad_w", 0)) {}
};

class Engine {
 public:
  Engine(const ModelSpec& m, const OptimizedOptions& opt) : m_(m), opt_(opt), consumers_(m.consumers()) {}

  ExecResult run(const std::vector<Tensor>& inputs);

 private:
  void hit(int node, Bug b) { result_.bug_hits[node].insert(b); }
  bool on(Bug b) const { return opt_.bugs.test(static_cast<std::size_t>(b)); }
  const Planar& in(const ModelNode& n, std::size_t k) const {
    return values_[static_cast<std::size_t>(n.inputs[k].node)];
  }

  void convert();
  std::vector<std::vector<int>> plan() const;
  Planar conv(const ModelNode& n, const Planar& x, const TensorType& type, const ModelNode* bias, const ModelNode* relu);
  Planar depthwise(const ModelNode& n, const Planar& x, const TensorType& type);
  Planar pool(const ModelNode& n, const Planar& x, const TensorType& type, bool average);
  Planar elementwise(const ModelNode& n, const Planar& a, const Planar& b);
  Planar mul_add(const ModelNode& mul, const ModelNode& add);
  Planar concat(const ModelNode& n, const TensorType& type);
  Planar softmax(const Planar& x);
  Planar cast(const ModelNode& n, const Planar& x, DType to);
  Planar single(const ModelNode& n, const std::vector<Tensor>& inputs);
  void check_fanout(const ModelNode& n);

  const ModelSpec& m_;
  OptimizedOptions opt_;
  std::vector<std::vector<PortRef>> consumers_;
  std::vector<TensorType> types_;
  std::vector<Planar> values_;
  ExecResult result_;
};

void Engine::convert() {
  for (const auto& n : m_.nodes) {
    if (!is_builtin(n.op))
      throw Abort{{Stage::kConvert, 100, "reject", "unsupported operator " + n.op, n.id, n.op}};
    if (n.op == "DepthwiseConv2d" && on(Bug::kConvertDilatedDepthwise) &&
        (param_int(n.params, "dilation_h", 1) > 1 || param_int(n.params, "dilation_w", 1) > 1)) {
      hit(n.id, Bug::kConvertDilatedDepthwise);
      throw Abort{{Stage::kConvert, 108, "reject", "writeFb.cpp:108: Check failed: dilation == 1", n.id, n.op}};
    }
    if (types_[static_cast<std::size_t>(n.id)].shape.size() != 4)
      throw Abort{{Stage::kConvert, 101, "reject", "only rank-4 tensors are supported", n.id, n.op}};
  }
}

// Groups of node ids executed together; the last id is the group's tap.
std::vector<std::vector<int>> Engine::plan() const {
  std::vector<std::vector<int>> groups;
  std::vector<bool> taken(m_.nodes.size(), false);
  auto sole = [&](int id) -> const ModelNode* {
    const auto& c = consumers_[static_cast<std::size_t>(id)];
    if (c.size() != 1) return nullptr;
    return &m_.nodes[static_cast<std::size_t>(c[0].node)];
  };
  for (const auto& n : m_.nodes) {
    if (taken[static_cast<std::size_t>(n.id)]) continue;
    if (opt_.fuse && n.op == "Conv2d") {
      const ModelNode* b = sole(n.id);
      const ModelNode* r = b && b->op == "BiasAdd" ? sole(b->id) : nullptr;
      if (r && r->op == "Relu") {
        groups.push_back({n.id, b->id, r->id});
        taken[static_cast<std::size_t>(b->id)] = taken[static_cast<std::size_t>(r->id)] = true;
        continue;
      }
    }
    if (opt_.fuse && n.op == "Mul") {
      const ModelNode* a = sole(n.id);
      if (a && a->op == "Add" && !taken[static_cast<std::size_t>(a->id)]) {
        groups.push_back({n.id, a->id});
        taken[static_cast<std::size_t>(a->id)] = true;
        continue;
      }
    }
    groups.push_back({n.id});
  }
  // Run each group once all of its external inputs exist.
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.back() < b.back(); });
  return groups;
}

Planar Engine::conv(const ModelNode& n, const Planar& x, const TensorType& type, const ModelNode* bias,
                    const ModelNode* relu) {
  const Window p(n);
  const auto ic = x.dim[1];
  const auto oc = type.shape[3];
  const auto hwio = synth_values(m_.weights_seed, n.id, WeightTag::kFilter, static_cast<std::size_t>(p.fh * p.fw * ic * oc));
  // Re-pack to [oc][kh][kw][ic] so the reduction walks contiguous memory.
  std::vector<float> w(hwio.size());
  for (std::int64_t o = 0; o < oc; ++o)
    for (std::int64_t k = 0; k < p.fh * p.fw; ++k)
      for (std::int64_t c = 0; c < ic; ++c)
        w[static_cast<std::size_t>((o * p.fh * p.fw + k) * ic + c)] = hwio[static_cast<std::size_t>((k * ic + c) * oc + o)];
  std::vector<float> b;
  if (bias) b = synth_values(m_.weights_seed, bias->id, WeightTag::kBias, static_cast<std::size_t>(oc));

  const bool offset = on(Bug::kStride2Offset) && (p.sh > 1 || p.sw > 1);
  const int tap = relu ? relu->id : bias ? bias->id : n.id;
  if (offset) hit(tap, Bug::kStride2Offset);
  const bool skip_relu = relu && on(Bug::kFusedReluSkip);
  if (skip_relu) hit(tap, Bug::kFusedReluSkip);
  const std::int64_t shift_h = offset && p.sh > 1 ? 1 : 0, shift_w = offset && p.sw > 1 ? 1 : 0;

  Planar out = make(planar_dims(type.shape), DType::kF32);
  for (std::int64_t bn = 0; bn < out.dim[0]; ++bn)
    for (std::int64_t o = 0; o < oc; ++o) {
      const float* wo = &w[static_cast<std::size_t>(o * p.fh * p.fw * ic)];
      for (std::int64_t oh = 0; oh < out.dim[2]; ++oh)
        for (std::int64_t ow = 0; ow < out.dim[3]; ++ow) {
          double acc = 0.0;
          for (std::int64_t kh = 0; kh < p.fh; ++kh) {
            const auto ih = oh * p.sh - p.ph + kh * p.dh + shift_h;
            if (ih < 0 || ih >= x.dim[2]) continue;
            for (std::int64_t kw = 0; kw < p.fw; ++kw) {
              const auto iw = ow * p.sw - p.pw + kw * p.dw + shift_w;
              if (iw < 0 || iw >= x.dim[3]) continue;
              const float* wk = wo + (kh * p.fw + kw) * ic;
              std::size_t xi = x.idx(bn, 0, ih, iw);
              for (std::int64_t c = 0; c < ic; ++c, xi += static_cast<std::size_t>(x.plane()))
                acc += static_cast<double>(x.f[xi]) * static_cast<double>(wk[c]);
            }
          }
          float v = static_cast<float>(acc);
          if (bias) v = v + b[static_cast<std::size_t>(o)];
          if (relu && !skip_relu) v = kernels::relu(v);
          out.f[out.idx(bn, o, oh, ow)] = v;
        }
    }
  return out;
}

Planar Engine::depthwise(const ModelNode& n, const Planar& x, const TensorType& type) {
  const Window p(n);
  const auto ic = x.dim[1];
  const auto mult = param_int(n.params, "depth_multiplier", 1);
  const auto w = synth_values(m_.weights_seed, n.id, WeightTag::kFilter, static_cast<std::size_t>(p.fh * p.fw * ic * mult));
  const bool wrong = on(Bug::kDepthwiseMult) && mult > 1;
  if (wrong) hit(n.id, Bug::kDepthwiseMult);
  Planar out = make(planar_dims(type.shape), DType::kF32);
  for (std::int64_t bn = 0; bn < out.dim[0]; ++bn)
    for (std::int64_t o = 0; o < out.dim[1]; ++o) {
      const auto c = o / mult;
      const auto q = wrong ? mult - 1 - o % mult : o % mult;
      for (std::int64_t oh = 0; oh < out.dim[2]; ++oh)
        for (std::int64_t ow = 0; ow < out.dim[3]; ++ow) {
          double acc = 0.0;
          for (std::int64_t kh = 0; kh < p.fh; ++kh) {
            const auto ih = oh * p.sh - p.ph + kh * p.dh;
            if (ih < 0 || ih >= x.dim[2]) continue;
            for (std::int64_t kw = 0; kw < p.fw; ++kw) {
              const auto iw = ow * p.sw - p.pw + kw * p.dw;
              if (iw < 0 || iw >= x.dim[3]) continue;
              acc += static_cast<double>(x.f[x.idx(bn, c, ih, iw)]) *
                     static_cast<double>(w[static_cast<std::size_t>(((kh * p.fw + kw) * ic + c) * mult + q)]);
            }
          }
          out.f[out.idx(bn, o, oh, ow)] = static_cast<float>(acc);
        }
    }
  return out;
}

Planar Engine::pool(const ModelNode& n, const Planar& x, const TensorType& type, bool average) {
  const Window p(n);
  const bool padded = p.ph > 0 || p.pw > 0;
  const bool full_divisor = average && padded && on(Bug::kPoolPadCorner);
  const bool pad_wins = !average && padded && on(Bug::kMaxPoolPadZero);
  if (full_divisor) hit(n.id, Bug::kPoolPadCorner);
  if (pad_wins) hit(n.id, Bug::kMaxPoolPadZero);
  Planar out = make(planar_dims(type.shape), DType::kF32);
  for (std::int64_t bn = 0; bn < out.dim[0]; ++bn)
    for (std::int64_t c = 0; c < out.dim[1]; ++c)
      for (std::int64_t oh = 0; oh < out.dim[2]; ++oh)
        for (std::int64_t ow = 0; ow < out.dim[3]; ++ow) {
          double sum = 0.0;
          float best = 0.0f;
          int count = 0;
          bool touched_pad = false;
          for (std::int64_t kh = 0; kh < p.fh; ++kh) {
            const auto ih = oh * p.sh - p.ph + kh;
            for (std::int64_t kw = 0; kw < p.fw; ++kw) {
              const auto iw = ow * p.sw - p.pw + kw;
              if (ih < 0 || ih >= x.dim[2] || iw < 0 || iw >= x.dim[3]) {
                touched_pad = true;
                continue;
              }
              const float v = x.f[x.idx(bn, c, ih, iw)];
              sum += static_cast<double>(v);
              if (count == 0 || std::isnan(v) || (!std::isnan(best) && v > best)) best = v;
              ++count;
            }
          }
          float r = 0.0f;
          if (average) {
            const double divisor = full_divisor ? static_cast<double>(p.fh * p.fw) : count;
            if (count > 0) r = static_cast<float>(sum / divisor);
          } else if (count > 0) {
            r = best;
            if (pad_wins && touched_pad && best < 0.0f) r = 0.0f;
          }
          out.f[out.idx(bn, c, oh, ow)] = r;
        }
  return out;
}

void Engine::check_fanout(const ModelNode& n) {
  if (n.op != "Add" || !on(Bug::kAddFanoutAbort) || consumers_[static_cast<std::size_t>(n.id)].size() < 2) return;
  hit(n.id, Bug::kAddFanoutAbort);
  throw Abort{{Stage::kInfer, 134, "abort", "Aborted: shared Add output buffer released twice", n.id, n.op}};
}

Planar Engine::elementwise(const ModelNode& n, const Planar& a, const Planar& b) {
  check_fanout(n);
  Planar out = make(a.dim, DType::kF32);
  const std::size_t count = out.count();
  if (n.op == "Add") {
    for (std::size_t k = 0; k < count; ++k) out.f[k] = a.f[k] + b.f[k];
  } else if (n.op == "Sub") {
    for (std::size_t k = 0; k < count; ++k) out.f[k] = a.f[k] - b.f[k];
  } else if (n.op == "Mul") {
    for (std::size_t k = 0; k < count; ++k) out.f[k] = a.f[k] * b.f[k];
  } else {
    const bool nan_on_zero = on(Bug::kRealDivZeroNan);
    for (std::size_t k = 0; k < count; ++k) {
      if (nan_on_zero && b.f[k] == 0.0f) {
        out.f[k] = std::numeric_limits<float>::quiet_NaN();
        hit(n.id, Bug::kRealDivZeroNan);
      } else {
        out.f[k] = a.f[k] / b.f[k];
      }
    }
  }
  return out;
}

Planar Engine::mul_add(const ModelNode& mul, const ModelNode& add) {
  check_fanout(add);
  const Planar& a = in(mul, 0);
  const Planar& b = in(mul, 1);
  // The Add operand that is not the Mul output.
  const std::size_t other_slot = add.inputs[0].node == mul.id ? 1 : 0;
  const Planar& c = in(add, other_slot);
  Planar out = make(a.dim, DType::kF32);
  for (std::size_t k = 0; k < out.count(); ++k) {
    const float t = a.f[k] * b.f[k];
    out.f[k] = other_slot == 1 ? t + c.f[k] : c.f[k] + t;
  }
  return out;
}

Planar Engine::concat(const ModelNode& n, const TensorType& type) {
  const std::size_t axis = kAxis[param_int(n.params, "axis", 3)];
  const bool drop = on(Bug::kConcatDrop) && n.inputs.size() > 2;
  if (drop) hit(n.id, Bug::kConcatDrop);
  Planar out = make(planar_dims(type.shape), type.dtype);
  std::int64_t offset = 0;
  for (std::size_t k = 0; k < n.inputs.size(); ++k) {
    const Planar& x = in(n, k);
    const bool zero = drop && k + 1 == n.inputs.size();
    for (std::int64_t a = 0; a < x.dim[0]; ++a)
      for (std::int64_t b = 0; b < x.dim[1]; ++b)
        for (std::int64_t c = 0; c < x.dim[2]; ++c)
          for (std::int64_t d = 0; d < x.dim[3]; ++d) {
            std::array<std::int64_t, 4> o{a, b, c, d};
            o[axis] += offset;
            const std::size_t dst = out.idx(o[0], o[1], o[2], o[3]);
            const std::size_t src = x.idx(a, b, c, d);
            if (out.dtype == DType::kF32) out.f[dst] = zero ? 0.0f : x.f[src];
            else out.i[dst] = zero ? 0 : x.i[src];
          }
    offset += x.dim[axis];
  }
  return out;
}

Planar Engine::softmax(const Planar& x) {
  Planar out = x;
  const auto plane = x.plane();
  for (std::int64_t bn = 0; bn < x.dim[0]; ++bn)
    for (std::int64_t s = 0; s < plane; ++s) {
      const std::size_t base = static_cast<std::size_t>(bn * x.dim[1] * plane + s);
      const auto stride = static_cast<std::size_t>(plane);
      float mx = x.f[base];
      for (std::int64_t c = 1; c < x.dim[1]; ++c) {
        const float v = x.f[base + static_cast<std::size_t>(c) * stride];
        mx = v > mx ? v : mx;
      }
      double sum = 0.0;
      for (std::int64_t c = 0; c < x.dim[1]; ++c)
        sum += std::exp(static_cast<double>(x.f[base + static_cast<std::size_t>(c) * stride] - mx));
      for (std::int64_t c = 0; c < x.dim[1]; ++c) {
        const std::size_t k = base + static_cast<std::size_t>(c) * stride;
        out.f[k] = static_cast<float>(std::exp(static_cast<double>(x.f[k] - mx)) / sum);
      }
    }
  return out;
}

Planar Engine::cast(const ModelNode& n, const Planar& x, DType to) {
  Planar out = make(x.dim, to);
  const bool nearest = on(Bug::kCastSat) && x.dtype == DType::kF32 && to == DType::kI8;
  if (nearest) hit(n.id, Bug::kCastSat);
  for (std::size_t k = 0; k < x.count(); ++k) {
    if (to == DType::kF32) {
      out.f[k] = x.dtype == DType::kF32 ? x.f[k] : static_cast<float>(x.i[k]);
    } else if (x.dtype == DType::kF32) {
      out.i[k] = nearest ? (std::isnan(x.f[k]) ? 0 : kernels::saturate(std::nearbyint(static_cast<double>(x.f[k])), to))
                         : kernels::to_int(x.f[k], to);
    } else {
      out.i[k] = kernels::int_to_int(x.i[k], to);
    }
  }
  return out;
}

Planar Engine::single(const ModelNode& n, const std::vector<Tensor>& inputs) {
  const TensorType& type = types_[static_cast<std::size_t>(n.id)];
  const std::string& op = n.op;
  if (op == "Placeholder") {
    const Tensor& t = inputs[static_cast<std::size_t>(param_int(n.params, "index", 0))];
    if (t.shape != type.shape) throw Abort{{Stage::kInfer, 3, "fault", "input tensor shape mismatch", n.id, op}};
    return from_nhwc(t);
  }
  if (op == "Const") {
    Tensor t;
    t.shape = type.shape;
    t.f = synth_values(m_.weights_seed, n.id, WeightTag::kConst, static_cast<std::size_t>(element_count(t.shape)));
    return from_nhwc(t);
  }
  if (op == "Conv2d") return conv(n, in(n, 0), type, nullptr, nullptr);
  if (op == "DepthwiseConv2d") return depthwise(n, in(n, 0), type);
  if (op == "MaxPool") return pool(n, in(n, 0), type, false);
  if (op == "AvgPool") return pool(n, in(n, 0), type, true);
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "RealDiv") return elementwise(n, in(n, 0), in(n, 1));
  if (op == "Concat") return concat(n, type);
  if (op == "Softmax") return softmax(in(n, 0));
  if (op == "Cast") return cast(n, in(n, 0), type.dtype);
  if (op == "BiasAdd") {
    const Planar& x = in(n, 0);
    const auto bias = synth_values(m_.weights_seed, n.id, WeightTag::kBias, static_cast<std::size_t>(x.dim[1]));
    Planar out = x;
    for (std::int64_t bn = 0; bn < x.dim[0]; ++bn)
      for (std::int64_t c = 0; c < x.dim[1]; ++c) {
        const std::size_t base = x.idx(bn, c, 0, 0);
        for (std::int64_t s = 0; s < x.plane(); ++s) out.f[base + static_cast<std::size_t>(s)] += bias[static_cast<std::size_t>(c)];
      }
    return out;
  }
  if (op == "Relu" || op == "Relu6" || op == "Sigmoid" || op == "Tanh") {
    Planar out = in(n, 0);
    if (out.dtype != DType::kF32) {
      for (auto& v : out.i) v = op == "Relu" ? kernels::relu(v) : kernels::relu6(v);
    } else if (op == "Relu") {
      for (auto& v : out.f) v = kernels::relu(v);
    } else if (op == "Relu6") {
      for (auto& v : out.f) v = kernels::relu6(v);
    } else if (op == "Sigmoid") {
      for (auto& v : out.f) v = kernels::sigmoid(v);
    } else {
      for (auto& v : out.f) v = kernels::tanh(v);
    }
    return out;
  }
  if (op == "Slice") {
    const Planar& x = in(n, 0);
    const auto begin = param_ints(n.params, "begin");
    std::array<std::int64_t, 4> b{};
    for (std::size_t d = 0; d < 4; ++d) b[kAxis[d]] = begin[d];
    Planar out = make(planar_dims(type.shape), x.dtype);
    for (std::int64_t a = 0; a < out.dim[0]; ++a)
      for (std::int64_t c = 0; c < out.dim[1]; ++c)
        for (std::int64_t h = 0; h < out.dim[2]; ++h)
          for (std::int64_t w = 0; w < out.dim[3]; ++w) {
            const std::size_t src = x.idx(a + b[0], c + b[1], h + b[2], w + b[3]);
            const std::size_t dst = out.idx(a, c, h, w);
            if (x.dtype == DType::kF32) out.f[dst] = x.f[src];
            else out.i[dst] = x.i[src];
          }
    return out;
  }
  if (op == "Pad") {
    const Planar& x = in(n, 0);
    const auto pads = param_ints(n.params, "pads");
    std::array<std::int64_t, 4> lead{};
    for (std::size_t d = 0; d < 4; ++d) lead[kAxis[d]] = pads[2 * d];
    Planar out = make(planar_dims(type.shape), x.dtype);
    for (std::int64_t a = 0; a < x.dim[0]; ++a)
      for (std::int64_t c = 0; c < x.dim[1]; ++c)
        for (std::int64_t h = 0; h < x.dim[2]; ++h)
          for (std::int64_t w = 0; w < x.dim[3]; ++w) {
            const std::size_t dst = out.idx(a + lead[0], c + lead[1], h + lead[2], w + lead[3]);
            const std::size_t src = x.idx(a, c, h, w);
            if (x.dtype == DType::kF32) out.f[dst] = x.f[src];
            else out.i[dst] = x.i[src];
          }
    return out;
  }
  if (op == "Reshape" || op == "Transpose") {
    // Layout-sensitive: go through NHWC.
    Tensor t = to_nhwc(in(n, 0));
    if (op == "Reshape") {
      t.shape = type.shape;
      return from_nhwc(t);
    }
    const auto perm = param_ints(n.params, "perm");
    Tensor r = Tensor::zeros(type.shape, t.dtype);
    const Shape& s = t.shape;
    std::array<std::int64_t, 4> o{};
    std::size_t k = 0;
    for (o[0] = 0; o[0] < type.shape[0]; ++o[0])
      for (o[1] = 0; o[1] < type.shape[1]; ++o[1])
        for (o[2] = 0; o[2] < type.shape[2]; ++o[2])
          for (o[3] = 0; o[3] < type.shape[3]; ++o[3], ++k) {
            std::array<std::int64_t, 4> src{};
            for (std::size_t d = 0; d < 4; ++d) src[static_cast<std::size_t>(perm[d])] = o[d];
            const auto j = static_cast<std::size_t>(((src[0] * s[1] + src[1]) * s[2] + src[2]) * s[3] + src[3]);
            if (t.dtype == DType::kF32) r.f[k] = t.f[j];
            else r.i[k] = t.i[j];
          }
    return from_nhwc(r);
  }
  throw Abort{{Stage::kInfer, 3, "fault", "unsupported operator " + op, n.id, op}};
}

ExecResult Engine::run(const std::vector<Tensor>& inputs) {
  try {
    try {
      types_ = infer_shapes(m_);
    } catch (const ShapeError& e) {
      throw Abort{{Stage::kConvert, 2, "reject", e.what(), e.node(), m_.nodes[static_cast<std::size_t>(e.node())].op}};
    }
    convert();
    if (inputs.size() != m_.input_shapes.size())
      throw Abort{{Stage::kInfer, 3, "fault", "wrong number of input tensors", -1, ""}};
    values_.assign(m_.nodes.size(), Planar{});
    for (const auto& group : plan()) {
      const ModelNode& head = m_.nodes[static_cast<std::size_t>(group.front())];
      const int end = group.back();
      if (group.size() == 3) {
        values_[static_cast<std::size_t>(end)] =
            conv(head, in(head, 0), types_[static_cast<std::size_t>(end)], &m_.nodes[static_cast<std::size_t>(group[1])],
                 &m_.nodes[static_cast<std::size_t>(end)]);
      } else if (group.size() == 2) {
        values_[static_cast<std::size_t>(end)] = mul_add(head, m_.nodes[static_cast<std::size_t>(end)]);
      } else {
        values_[static_cast<std::size_t>(end)] = single(head, inputs);
      }
      if (opt_.keep_taps) result_.taps[end] = to_nhwc(values_[static_cast<std::size_t>(end)]);
    }
    for (int id : m_.outputs()) result_.outputs.push_back(to_nhwc(values_[static_cast<std::size_t>(id)]));
  } catch (const Abort& a) {
    result_.failure = a.failure;
    result_.outputs.clear();
  }
  return std::move(result_);
}

}  // namespace

namespace {

constexpr std::string_view kBugNames[kBugCount] = {
    "pool-pad-corner", "concat-drop",      "cast-sat",         "fused-relu-skip",  "stride2-offset",
    "realdiv-zero-nan", "maxpool-pad-zero", "depthwise-mult", "add-fanout-abort", "convert-dilated-depthwise",
};

}  // namespace

std::string_view bug_name(Bug b) { return kBugNames[static_cast<int>(b)]; }

BugMask parse_bug_mask(std::string_view csv) {
  BugMask mask;
  if (csv.empty() || csv == "none") return mask;
  if (csv == "all") return mask.set();
  while (!csv.empty()) {
    const auto comma = csv.find(',');
    const auto name = csv.substr(0, comma);
    bool found = false;
    for (int k = 0; k < kBugCount; ++k)
      if (kBugNames[k] == name) {
        mask.set(static_cast<std::size_t>(k));
        found = true;
      }
    if (!found) throw ConfigError("unknown bug name: " + std::string(name));
    if (comma == std::string_view::npos) break;
    csv.remove_prefix(comma + 1);
  }
  return mask;
}

std::string bug_mask_string(const BugMask& mask) {
  if (mask.none()) return "none";
  if (mask.all()) return "all";
  std::string out;
  for (int k = 0; k < kBugCount; ++k) {
    if (!mask.test(static_cast<std::size_t>(k))) continue;
    if (!out.empty()) out += ',';
    out += kBugNames[k];
  }
  return out;
}

std::string_view stage_name(Stage s) { return s == Stage::kConvert ? "convert" : "infer"; }

ExecResult run_optimized(const ModelSpec& m, const std::vector<Tensor>& inputs, const OptimizedOptions& options) {
  Engine engine(m, options);
  return engine.run(inputs);
}

}  // namespace gfuzz
