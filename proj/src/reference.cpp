#include <algorithm>
#include <cmath>

#include "gfuzz/error.hpp"
#include "gfuzz/interp.hpp"
#include "gfuzz/operators.hpp"
#include "gfuzz/shapecalc.hpp"
#include "kernels.hpp"

namespace gfuzz {

namespace {

struct Fault {
  std::string message;
};

std::size_t at(const Shape& s, std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
  return static_cast<std::size_t>(((n * s[1] + h) * s[2] + w) * s[3] + c);
}

struct Spatial {
  std::int64_t fh, fw, sh, sw, dh, dw, ph, pw;
};

Spatial spatial_params(const ModelNode& n) {
  return {param_int(n.params, "kernel_h", 1),   param_int(n.params, "kernel_w", 1),
          param_int(n.params, "stride_h", 1),   param_int(n.params, "stride_w", 1),
          param_int(n.params, "dilation_h", 1), param_int(n.params, "dilation_w", 1),
          param_int(n.params, "pad_h", 0),      param_int(n.params, "pad_w", 0)};
}

Tensor conv2d(const ModelSpec& m, const ModelNode& n, const Tensor& x, const Shape& out_shape) {
  const Spatial p = spatial_params(n);
  const auto ic = x.shape[3], oc = out_shape[3];
  const auto w = synth_values(m.weights_seed, n.id, WeightTag::kFilter,
                              static_cast<std::size_t>(p.fh * p.fw * ic * oc));
  Tensor out = Tensor::zeros(out_shape, DType::kF32);
  for (std::int64_t b = 0; b < out_shape[0]; ++b)
    for (std::int64_t oh = 0; oh < out_shape[1]; ++oh)
      for (std::int64_t ow = 0; ow < out_shape[2]; ++ow)
        for (std::int64_t o = 0; o < oc; ++o) {
          double acc = 0.0;
          for (std::int64_t kh = 0; kh < p.fh; ++kh) {
            const auto ih = oh * p.sh - p.ph + kh * p.dh;
            if (ih < 0 || ih >= x.shape[1]) continue;
            for (std::int64_t kw = 0; kw < p.fw; ++kw) {
              const auto iw = ow * p.sw - p.pw + kw * p.dw;
              if (iw < 0 || iw >= x.shape[2]) continue;
              for (std::int64_t c = 0; c < ic; ++c)
                acc += static_cast<double>(x.f[at(x.shape, b, ih, iw, c)]) *
                       static_cast<double>(w[static_cast<std::size_t>(((kh * p.fw + kw) * ic + c) * oc + o)]);
            }
          }
          out.f[at(out_shape, b, oh, ow, o)] = static_cast<float>(acc);
        }
  return out;
}

Tensor depthwise(const ModelSpec& m, const ModelNode& n, const Tensor& x, const Shape& out_shape) {
  const Spatial p = spatial_params(n);
  const auto ic = x.shape[3];
  const auto mult = param_int(n.params, "depth_multiplier", 1);
  const auto w = synth_values(m.weights_seed, n.id, WeightTag::kFilter,
                              static_cast<std::size_t>(p.fh * p.fw * ic * mult));
  Tensor out = Tensor::zeros(out_shape, DType::kF32);
  for (std::int64_t b = 0; b < out_shape[0]; ++b)
    for (std::int64_t oh = 0; oh < out_shape[1]; ++oh)
      for (std::int64_t ow = 0; ow < out_shape[2]; ++ow)
        for (std::int64_t c = 0; c < ic; ++c)
          for (std::int64_t q = 0; q < mult; ++q) {
            double acc = 0.0;
            for (std::int64_t kh = 0; kh < p.fh; ++kh) {
              const auto ih = oh * p.sh - p.ph + kh * p.dh;
              if (ih < 0 || ih >= x.shape[1]) continue;
              for (std::int64_t kw = 0; kw < p.fw; ++kw) {
                const auto iw = ow * p.sw - p.pw + kw * p.dw;
                if (iw < 0 || iw >= x.shape[2]) continue;
                acc += static_cast<double>(x.f[at(x.shape, b, ih, iw, c)]) *
                       static_cast<double>(w[static_cast<std::size_t>(((kh * p.fw + kw) * ic + c) * mult + q)]);
              }
            }
            out.f[at(out_shape, b, oh, ow, c * mult + q)] = static_cast<float>(acc);
          }
  return out;
}

Tensor pool(const ModelNode& n, const Tensor& x, const Shape& out_shape, bool average) {
  const Spatial p = spatial_params(n);
  Tensor out = Tensor::zeros(out_shape, DType::kF32);
  for (std::int64_t b = 0; b < out_shape[0]; ++b)
    for (std::int64_t oh = 0; oh < out_shape[1]; ++oh)
      for (std::int64_t ow = 0; ow < out_shape[2]; ++ow)
        for (std::int64_t c = 0; c < out_shape[3]; ++c) {
          double sum = 0.0;
          float best = 0.0f;
          int count = 0;
          for (std::int64_t kh = 0; kh < p.fh; ++kh) {
            const auto ih = oh * p.sh - p.ph + kh;
            if (ih < 0 || ih >= x.shape[1]) continue;
            for (std::int64_t kw = 0; kw < p.fw; ++kw) {
              const auto iw = ow * p.sw - p.pw + kw;
              if (iw < 0 || iw >= x.shape[2]) continue;
              const float v = x.f[at(x.shape, b, ih, iw, c)];
              sum += static_cast<double>(v);
              if (count == 0 || std::isnan(v) || (!std::isnan(best) && v > best)) best = v;
              ++count;
            }
          }
          float r = 0.0f;
          if (count > 0) r = average ? static_cast<float>(sum / count) : best;
          out.f[at(out_shape, b, oh, ow, c)] = r;
        }
  return out;
}

Tensor binary(const std::string& op, const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros(a.shape, DType::kF32);
  for (std::size_t k = 0; k < a.f.size(); ++k) {
    const float x = a.f[k], y = b.f[k];
    if (op == "Add") out.f[k] = x + y;
    else if (op == "Sub") out.f[k] = x - y;
    else if (op == "Mul") out.f[k] = x * y;
    else out.f[k] = x / y;
  }
  return out;
}

Tensor unary(const std::string& op, const Tensor& x) {
  Tensor out = x;
  if (x.dtype != DType::kF32) {
    for (auto& v : out.i) v = op == "Relu" ? kernels::relu(v) : kernels::relu6(v);
    return out;
  }
  for (auto& v : out.f) {
    if (op == "Relu") v = kernels::relu(v);
    else if (op == "Relu6") v = kernels::relu6(v);
    else if (op == "Sigmoid") v = kernels::sigmoid(v);
    else v = kernels::tanh(v);
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  Tensor out = x;
  const auto c = x.shape.back();
  const auto rows = static_cast<std::int64_t>(x.f.size()) / c;
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* row = &x.f[static_cast<std::size_t>(r * c)];
    float mx = row[0];
    for (std::int64_t k = 1; k < c; ++k) mx = row[k] > mx ? row[k] : mx;
    double sum = 0.0;
    for (std::int64_t k = 0; k < c; ++k) sum += std::exp(static_cast<double>(row[k] - mx));
    for (std::int64_t k = 0; k < c; ++k)
      out.f[static_cast<std::size_t>(r * c + k)] = static_cast<float>(std::exp(static_cast<double>(row[k] - mx)) / sum);
  }
  return out;
}

Tensor bias_add(const ModelSpec& m, const ModelNode& n, const Tensor& x) {
  const auto c = x.shape.back();
  const auto bias = synth_values(m.weights_seed, n.id, WeightTag::kBias, static_cast<std::size_t>(c));
  Tensor out = x;
  for (std::size_t k = 0; k < out.f.size(); ++k) out.f[k] = x.f[k] + bias[k % static_cast<std::size_t>(c)];
  return out;
}

// Generic NHWC index walk used by the data-movement operators.
template <class F>
void for_each_index(const Shape& s, F&& f) {
  std::vector<std::int64_t> idx(s.size(), 0);
  const auto total = element_count(s);
  for (std::int64_t k = 0; k < total; ++k) {
    f(idx, static_cast<std::size_t>(k));
    for (std::size_t d = s.size(); d-- > 0;) {
      if (++idx[d] < s[d]) break;
      idx[d] = 0;
    }
  }
}

std::size_t flat(const Shape& s, const std::vector<std::int64_t>& idx) {
  std::size_t k = 0;
  for (std::size_t d = 0; d < s.size(); ++d) k = k * static_cast<std::size_t>(s[d]) + static_cast<std::size_t>(idx[d]);
  return k;
}

void copy_element(Tensor& dst, std::size_t j, const Tensor& src, std::size_t k) {
  if (dst.dtype == DType::kF32) dst.f[j] = src.f[k];
  else dst.i[j] = src.i[k];
}

Tensor concat(const std::vector<const Tensor*>& in, std::int64_t axis, const Shape& out_shape) {
  Tensor out = Tensor::zeros(out_shape, in[0]->dtype);
  std::int64_t offset = 0;
  for (const Tensor* t : in) {
    if (t->shape.size() != out_shape.size()) throw Fault{"Concat rank mismatch at runtime"};
    for_each_index(t->shape, [&](const std::vector<std::int64_t>& idx, std::size_t k) {
      auto o = idx;
      o[static_cast<std::size_t>(axis)] += offset;
      copy_element(out, flat(out_shape, o), *t, k);
    });
    offset += t->shape[static_cast<std::size_t>(axis)];
  }
  if (offset != out_shape[static_cast<std::size_t>(axis)]) throw Fault{"Concat axis extent mismatch at runtime"};
  return out;
}

Tensor transpose(const Tensor& x, const std::vector<std::int64_t>& perm, const Shape& out_shape) {
  Tensor out = Tensor::zeros(out_shape, x.dtype);
  for_each_index(out_shape, [&](const std::vector<std::int64_t>& idx, std::size_t k) {
    std::vector<std::int64_t> src(idx.size());
    for (std::size_t d = 0; d < idx.size(); ++d) src[static_cast<std::size_t>(perm[d])] = idx[d];
    copy_element(out, k, x, flat(x.shape, src));
  });
  return out;
}

Tensor slice(const Tensor& x, const std::vector<std::int64_t>& begin, const Shape& out_shape) {
  for (std::size_t d = 0; d < out_shape.size(); ++d)
    if (begin[d] < 0 || begin[d] + out_shape[d] > x.shape[d]) throw Fault{"Slice window out of bounds"};
  Tensor out = Tensor::zeros(out_shape, x.dtype);
  for_each_index(out_shape, [&](const std::vector<std::int64_t>& idx, std::size_t k) {
    auto src = idx;
    for (std::size_t d = 0; d < src.size(); ++d) src[d] += begin[d];
    copy_element(out, k, x, flat(x.shape, src));
  });
  return out;
}

Tensor pad(const Tensor& x, const std::vector<std::int64_t>& pads, const Shape& out_shape) {
  Tensor out = Tensor::zeros(out_shape, x.dtype);
  for_each_index(x.shape, [&](const std::vector<std::int64_t>& idx, std::size_t k) {
    auto dst = idx;
    for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += pads[2 * d];
    copy_element(out, flat(out_shape, dst), x, k);
  });
  return out;
}

Tensor cast(const Tensor& x, DType to) {
  Tensor out = Tensor::zeros(x.shape, to);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (to == DType::kF32) out.f[k] = x.dtype == DType::kF32 ? x.f[k] : static_cast<float>(x.i[k]);
    else out.i[k] = x.dtype == DType::kF32 ? kernels::to_int(x.f[k], to) : kernels::int_to_int(x.i[k], to);
  }
  return out;
}

Tensor eval(const ModelSpec& m, const ModelNode& n, const std::vector<const Tensor*>& in, const TensorType& type,
            const std::vector<Tensor>& inputs) {
  const std::string& op = n.op;
  if (op == "Placeholder") {
    const Tensor& t = inputs[static_cast<std::size_t>(param_int(n.params, "index", 0))];
    if (t.shape != type.shape) throw Fault{"input tensor shape does not match the model"};
    return t;
  }
  if (op == "Const") {
    Tensor t;
    t.shape = type.shape;
    t.f = synth_values(m.weights_seed, n.id, WeightTag::kConst, static_cast<std::size_t>(element_count(t.shape)));
    return t;
  }
  if (op == "Conv2d") return conv2d(m, n, *in[0], type.shape);
  if (op == "DepthwiseConv2d") return depthwise(m, n, *in[0], type.shape);
  if (op == "MaxPool") return pool(n, *in[0], type.shape, false);
  if (op == "AvgPool") return pool(n, *in[0], type.shape, true);
  if (op == "BiasAdd") return bias_add(m, n, *in[0]);
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "RealDiv") return binary(op, *in[0], *in[1]);
  if (op == "Relu" || op == "Relu6" || op == "Sigmoid" || op == "Tanh") return unary(op, *in[0]);
  if (op == "Softmax") return softmax(*in[0]);
  if (op == "Concat") return concat(in, param_int(n.params, "axis", 3), type.shape);
  if (op == "Reshape") {
    Tensor t = *in[0];
    t.shape = type.shape;
    return t;
  }
  if (op == "Transpose") return transpose(*in[0], param_ints(n.params, "perm"), type.shape);
  if (op == "Slice") return slice(*in[0], param_ints(n.params, "begin"), type.shape);
  if (op == "Pad") return pad(*in[0], param_ints(n.params, "pads"), type.shape);
  if (op == "Cast") return cast(*in[0], type.dtype);
  throw Fault{"unsupported operator " + op};
}

}  // namespace

ExecResult run_reference(const ModelSpec& m, const std::vector<Tensor>& inputs, bool keep_taps) {
  ExecResult result;
  std::vector<TensorType> types;
  try {
    types = infer_shapes(m);
  } catch (const ShapeError& e) {
    result.failure = EngineFailure{Stage::kConvert, 2, "reject", e.what(), e.node(),
                                   m.nodes[static_cast<std::size_t>(e.node())].op};
    return result;
  }
  if (inputs.size() != m.input_shapes.size()) {
    result.failure = EngineFailure{Stage::kInfer, 3, "fault", "wrong number of input tensors", -1, ""};
    return result;
  }
  std::vector<Tensor> values(m.nodes.size());
  const auto consumers = m.consumers();
  std::vector<int> pending(m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) pending[i] = static_cast<int>(consumers[i].size());

  for (const auto& n : m.nodes) {
    std::vector<const Tensor*> in;
    for (const auto& ref : n.inputs) in.push_back(&values[static_cast<std::size_t>(ref.node)]);
    try {
      values[static_cast<std::size_t>(n.id)] = eval(m, n, in, types[static_cast<std::size_t>(n.id)], inputs);
    } catch (const Fault& f) {
      result.failure = EngineFailure{Stage::kInfer, 3, "fault", f.message, n.id, n.op};
      return result;
    }
    if (keep_taps) result.taps[n.id] = values[static_cast<std::size_t>(n.id)];
    // Free intermediates nobody needs any more.
    for (const auto& ref : n.inputs)
      if (--pending[static_cast<std::size_t>(ref.node)] == 0 && !keep_taps && !consumers[static_cast<std::size_t>(ref.node)].empty())
        values[static_cast<std::size_t>(ref.node)] = Tensor{};
  }
  for (int id : m.outputs()) result.outputs.push_back(values[static_cast<std::size_t>(id)]);
  return result;
}

}  // namespace gfuzz
