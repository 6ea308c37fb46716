#include "gfuzz/tensor.hpp"

#include <bit>
#include <cstring>

#include "gfuzz/error.hpp"
#include "gfuzz/rng.hpp"

namespace gfuzz {

Tensor Tensor::zeros(Shape shape, DType dtype) {
  Tensor t;
  const auto n = static_cast<std::size_t>(element_count(shape));
  t.shape = std::move(shape);
  t.dtype = dtype;
  if (dtype == DType::kF32) t.f.assign(n, 0.0f);
  else t.i.assign(n, 0);
  return t;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape || a.dtype != b.dtype || a.size() != b.size()) return false;
  if (a.dtype != DType::kF32) return a.i == b.i;
  return std::memcmp(a.f.data(), b.f.data(), a.f.size() * sizeof(float)) == 0;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::string encode_tns(const Tensor& t) {
  std::string out = "GFTZ";
  out.push_back(1);
  out.push_back(static_cast<char>(t.dtype));
  out.push_back(static_cast<char>(t.shape.size()));
  for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
  switch (t.dtype) {
    case DType::kF32:
      for (float x : t.f) put_u32(out, std::bit_cast<std::uint32_t>(x));
      break;
    case DType::kI32:
      for (auto x : t.i) put_u32(out, static_cast<std::uint32_t>(x));
      break;
    case DType::kI8:
      for (auto x : t.i) out.push_back(static_cast<char>(static_cast<std::int8_t>(x)));
      break;
  }
  return out;
}

Tensor decode_tns(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 7 || bytes.substr(0, 4) != "GFTZ") throw ParseError("tns: bad magic");
  if (p[4] != 1) throw ParseError("tns: unsupported version " + std::to_string(p[4]));
  if (p[5] > 2) throw ParseError("tns: unknown dtype " + std::to_string(p[5]));
  Tensor t;
  t.dtype = static_cast<DType>(p[5]);
  const std::size_t rank = p[6];
  std::size_t off = 7;
  if (n < off + 4 * rank) throw ParseError("tns: truncated header");
  std::size_t count = 1;
  for (std::size_t k = 0; k < rank; ++k, off += 4) {
    t.shape.push_back(get_u32(p + off));
    count *= static_cast<std::size_t>(t.shape.back());
  }
  const std::size_t width = t.dtype == DType::kI8 ? 1 : 4;
  if (n != off + count * width) throw ParseError("tns: payload size does not match shape");
  if (t.dtype == DType::kF32) {
    t.f.resize(count);
    for (std::size_t k = 0; k < count; ++k) t.f[k] = std::bit_cast<float>(get_u32(p + off + 4 * k));
  } else if (t.dtype == DType::kI32) {
    t.i.resize(count);
    for (std::size_t k = 0; k < count; ++k) t.i[k] = static_cast<std::int32_t>(get_u32(p + off + 4 * k));
  } else {
    t.i.resize(count);
    for (std::size_t k = 0; k < count; ++k) t.i[k] = static_cast<std::int8_t>(p[off + k]);
  }
  return t;
}

std::vector<float> synth_values(std::uint64_t seed, std::int64_t node, WeightTag tag, std::size_t count) {
  const std::uint64_t base =
      derive_seed(derive_seed(seed, static_cast<std::uint64_t>(node)), static_cast<std::uint64_t>(tag));
  std::vector<float> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t x = splitmix64(base + k * 0x9e3779b97f4a7c15ULL);
    const double u = static_cast<double>(x >> 40) * 0x1p-24;
    out[k] = static_cast<float>(2.0 * u - 1.0);
  }
  return out;
}

std::vector<Tensor> synthesize_inputs(const ModelSpec& m) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < m.input_shapes.size(); ++i) {
    Tensor t;
    t.shape = m.input_shapes[i];
    t.f = synth_values(m.weights_seed, -1 - static_cast<std::int64_t>(i), WeightTag::kInput,
                       static_cast<std::size_t>(element_count(t.shape)));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace gfuzz
