#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gfuzz/ir.hpp"

namespace gfuzz {

// Row-major tensor. f32 data lives in `f`, i32 and i8 data in `i`.
struct Tensor {
  Shape shape;
  DType dtype = DType::kF32;
  std::vector<float> f;
  std::vector<std::int32_t> i;

  static Tensor zeros(Shape shape, DType dtype);

  std::size_t size() const { return dtype == DType::kF32 ? f.size() : i.size(); }
  double value(std::size_t k) const { return dtype == DType::kF32 ? static_cast<double>(f[k]) : i[k]; }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Bitwise equality (NaN payloads included).
bool bit_equal(const Tensor& a, const Tensor& b);

// "GFTZ", u8 version 1, u8 dtype, u8 rank, rank x u32 LE dims, LE data.
std::string encode_tns(const Tensor& t);
Tensor decode_tns(std::string_view bytes);

// Deterministic values in [-1, 1) keyed by (seed, node, tag).
enum class WeightTag : std::uint64_t { kInput = 1, kFilter = 2, kBias = 3, kConst = 4 };
std::vector<float> synth_values(std::uint64_t seed, std::int64_t node, WeightTag tag, std::size_t count);

// One tensor per graph input, in placeholder-index order.
std::vector<Tensor> synthesize_inputs(const ModelSpec& m);

}  // namespace gfuzz
