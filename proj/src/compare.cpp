#include <algorithm>
#include <cmath>

#include "gfuzz/engine.hpp"

namespace gfuzz {

bool element_agrees(double ref, double test) {
  const bool nan_ref = std::isnan(ref), nan_test = std::isnan(test);
  if (nan_ref || nan_test) return nan_ref && nan_test;
  if (std::isinf(ref) || std::isinf(test)) return ref == test;
  return std::abs(ref - test) / std::max(std::abs(ref), kRelativeEpsilon) <= kElementTolerance;
}

double success_ratio(const Tensor& ref, const Tensor& test) {
  if (ref.shape != test.shape || ref.dtype != test.dtype || ref.size() != test.size()) return 0.0;
  if (ref.size() == 0) return 1.0;
  std::size_t ok = 0;
  for (std::size_t k = 0; k < ref.size(); ++k) ok += element_agrees(ref.value(k), test.value(k));
  return static_cast<double>(ok) / static_cast<double>(ref.size());
}

ComparisonReport compare(const std::vector<Tensor>& ref, const std::vector<Tensor>& test) {
  ComparisonReport r;
  if (ref.size() != test.size()) {
    r.ratios.assign(ref.size(), 0.0);
    r.re = 0.0;
    return r;
  }
  for (std::size_t k = 0; k < ref.size(); ++k) {
    r.ratios.push_back(success_ratio(ref[k], test[k]));
    r.re = std::min(r.re, r.ratios.back());
  }
  return r;
}

}  // namespace gfuzz
