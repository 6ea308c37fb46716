#pragma once

// Scalar semantics shared by both interpreters. Loop structure and layout
// stay separate; only the per-element arithmetic lives here so that clean
// runs agree bit for bit.

#include <cmath>
#include <cstdint>
#include <limits>

#include "gfuzz/ir.hpp"

namespace gfuzz::kernels {

inline float relu(float x) { return x < 0.0f ? 0.0f : x; }
inline float relu6(float x) { return x < 0.0f ? 0.0f : (x > 6.0f ? 6.0f : x); }
inline std::int32_t relu(std::int32_t x) { return x < 0 ? 0 : x; }
inline std::int32_t relu6(std::int32_t x) { return x < 0 ? 0 : (x > 6 ? 6 : x); }
inline float sigmoid(float x) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x)))); }
inline float tanh(float x) { return static_cast<float>(std::tanh(static_cast<double>(x))); }

inline std::int32_t saturate(double v, DType to) {
  const double lo = to == DType::kI8 ? -128.0 : static_cast<double>(std::numeric_limits<std::int32_t>::min());
  const double hi = to == DType::kI8 ? 127.0 : static_cast<double>(std::numeric_limits<std::int32_t>::max());
  if (v < lo) return static_cast<std::int32_t>(lo);
  if (v > hi) return static_cast<std::int32_t>(hi);
  return static_cast<std::int32_t>(v);
}

// f32 → integer: NaN maps to 0, then truncation toward zero and saturation.
inline std::int32_t to_int(float x, DType to) {
  if (std::isnan(x)) return 0;
  return saturate(std::trunc(static_cast<double>(x)), to);
}

inline std::int32_t int_to_int(std::int32_t x, DType to) { return saturate(static_cast<double>(x), to); }

}  // namespace gfuzz::kernels
