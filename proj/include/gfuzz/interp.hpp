#pragma once

#include <bitset>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gfuzz/ir.hpp"
#include "gfuzz/tensor.hpp"

namespace gfuzz {

// Defects the optimized interpreter can be built with. Each fires only on a
// specific structural pattern.
enum class Bug : int {
  kPoolPadCorner,            // AvgPool divides padded windows by the full window
  kConcatDrop,               // Concat of more than two inputs zeroes the last one
  kCastSat,                  // f32→i8 rounds to nearest instead of truncating
  kFusedReluSkip,            // fused Conv2d+BiasAdd+Relu omits the Relu
  kStride2Offset,            // strided Conv2d reads one row/column late
  kRealDivZeroNan,           // x/0 yields NaN instead of ±inf
  kMaxPoolPadZero,           // MaxPool lets padding (0) win the max
  kDepthwiseMult,            // DepthwiseConv2d picks the wrong multiplier filter
  kAddFanoutAbort,           // Add whose output feeds two or more nodes aborts
  kConvertDilatedDepthwise,  // dilated DepthwiseConv2d rejected at conversion
};
constexpr int kBugCount = 10;
using BugMask = std::bitset<kBugCount>;

std::string_view bug_name(Bug b);
// Comma-separated names, "all" or "none"/"" (empty mask). Throws ConfigError.
BugMask parse_bug_mask(std::string_view csv);
std::string bug_mask_string(const BugMask& mask);

enum class Stage { kConvert, kInfer };
std::string_view stage_name(Stage s);

struct EngineFailure {
  Stage stage = Stage::kInfer;
  int code = 0;
  std::string kind;  // "abort", "fault", "timeout", "crash", "reject"
  std::string message;
  int node = -1;
  std::string op;
};

struct ExecResult {
  std::vector<Tensor> outputs;           // ModelSpec::outputs() order
  std::map<int, Tensor> taps;            // node id → output, when requested
  std::map<int, std::set<Bug>> bug_hits;  // node where a defect fired
  std::optional<EngineFailure> failure;
};

// Naive NHWC evaluation, one node at a time.
ExecResult run_reference(const ModelSpec& m, const std::vector<Tensor>& inputs, bool keep_taps = false);

struct OptimizedOptions {
  BugMask bugs;
  bool fuse = true;
  bool keep_taps = false;  // taps exist only at fused-group ends
};

// NCHW evaluation with Conv2d+BiasAdd+Relu and Mul+Add fusion.
ExecResult run_optimized(const ModelSpec& m, const std::vector<Tensor>& inputs, const OptimizedOptions& options);

}  // namespace gfuzz
