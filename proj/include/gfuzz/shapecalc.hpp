#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfuzz/ir.hpp"
#include "gfuzz/rng.hpp"

namespace gfuzz {

struct TensorType {
  Shape shape;
  DType dtype = DType::kF32;
  friend bool operator==(const TensorType&, const TensorType&) = default;
};

// Output type of one node given its input types. Throws ShapeError.
TensorType infer_node(const ModelSpec& m, const ModelNode& node, const std::vector<TensorType>& inputs);

// Forward propagation in node order. Throws ShapeError naming the node.
std::vector<TensorType> infer_shapes(const ModelSpec& m);

// Conventional output extent: floor((i + 2p - d(f-1) - 1) / s) + 1.
std::int64_t conv_output_extent(std::int64_t in, std::int64_t f, std::int64_t s, std::int64_t d, std::int64_t p);

struct AxisSolution {
  std::int64_t kernel = 1;
  std::int64_t stride = 1;
  std::int64_t dilation = 1;
  std::int64_t pad = 0;
  friend bool operator==(const AxisSolution&, const AxisSolution&) = default;
};

struct AxisLimits {
  std::int64_t kernel_lo = 1, kernel_hi = 5;
  std::int64_t stride_lo = 1, stride_hi = 2;
  std::int64_t dilation_lo = 1, dilation_hi = 3;
};

// Every (f, s, d, p) with 2p = (s-1)*in + d*(f-1) and 0 <= p <= f inside the
// limits, in (f, s, d) lexicographic order.
std::vector<AxisSolution> same_solutions(std::int64_t in, const AxisLimits& limits);

// Keeps the hinted (f, s, d) when some pad makes it SAME-preserving, else
// draws uniformly from same_solutions. Throws GenerationError if empty.
AxisSolution solve_axis(std::int64_t in, const AxisLimits& limits, const AxisSolution& hint, Rng& rng);

// Limits for one spatial axis ("h" or "w") from an operator schema.
AxisLimits axis_limits(const std::string& op, const ParamSchema& schema, const std::string& axis);

// Fills kernel/stride/dilation/pad params of a Conv2d, DepthwiseConv2d,
// MaxPool or AvgPool so the output keeps H and W of `input` (NHWC). Values
// already in `params` act as hints; missing shape-free params are sampled.
ParamMap solve_same_shape_params(const Shape& input, const std::string& op, const ParamSchema& schema,
                                 ParamMap params, Rng& rng);

struct ShapeCalcOptions {
  // Draw shape-free params at random (PM); otherwise use default_params.
  bool sample_params = true;
  // Leave existing params alone and only add adapters.
  bool keep_params = false;
  bool merge_pads = true;
  std::int64_t max_elements = std::int64_t{1} << 18;
  std::int64_t max_macs = std::int64_t{16} << 20;
};

// One topological pass: casts for dtype mismatches, Slice/Pad adapters in
// front of aggregations whose operand shapes disagree, and concrete params
// for every node. Then merges eligible Pad nodes into their consumer. `m`
// must have input_shapes set; `schemas` (one per node, may be empty) gives
// corpus param domains. Throws GenerationError when the model cannot be
// made executable within the size limits.
ModelSpec calc_shapes_and_params(const ModelSpec& m, const std::vector<ParamSchema>& schemas,
                                 const ShapeCalcOptions& options, Rng& rng);

// Idempotent adapter insertion on a fully parameterized model.
ModelSpec insert_aggregation_adapters(const ModelSpec& m, Rng& rng);

// Pad→Conv2d/DepthwiseConv2d (symmetric H/W padding that keeps pad <= kernel)
// and Pad→Pad folding. Output shapes of surviving nodes are unchanged.
ModelSpec merge_pads(const ModelSpec& m);

// Multiply-accumulate estimate of the conv and pool nodes.
std::int64_t estimate_macs(const ModelSpec& m, const std::vector<TensorType>& types);

// Keeps nodes with keep[i] true, renumbers, and redirects inputs of removed
// nodes through `forward[i]` (the node that replaces i).
ModelSpec compact_model(const ModelSpec& m, const std::vector<bool>& keep, const std::vector<int>& forward);

}  // namespace gfuzz
