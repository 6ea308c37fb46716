#include "gfuzz/operators.hpp"

#include <algorithm>

namespace gfuzz {
namespace {

ParamSpec sd(std::string name) { return {std::move(name), ParamDomain::shape_dependent()}; }
ParamSpec rng(std::string name, std::int64_t lo, std::int64_t hi) {
  return {std::move(name), ParamDomain::range(lo, hi)};
}
ParamSpec en(std::string name, std::vector<ParamValue> values) {
  return {std::move(name), ParamDomain::enumeration(std::move(values))};
}

OperatorKind fixed(std::string name, int arity, ParamSchema params = {}) {
  return {std::move(name), ArityClass::kFixed, arity, arity, std::move(params)};
}

ParamSchema spatial_schema(bool dilated, std::int64_t max_kernel) {
  ParamSchema s{rng("kernel_h", 1, max_kernel), rng("kernel_w", 1, max_kernel),
                rng("stride_h", 1, 2), rng("stride_w", 1, 2)};
  if (dilated) {
    s.push_back(rng("dilation_h", 1, 3));
    s.push_back(rng("dilation_w", 1, 3));
  }
  s.push_back(sd("pad_h"));
  s.push_back(sd("pad_w"));
  s.push_back(en("padding", {std::string("SAME")}));
  return s;
}

std::vector<OperatorKind> make_registry() {
  std::vector<OperatorKind> ops;
  ops.push_back(fixed("Placeholder", 0, {sd("index")}));
  ops.push_back(fixed("Const", 0, {sd("shape")}));

  ParamSchema conv = spatial_schema(true, 5);
  conv.insert(conv.begin(), rng("filters", 1, 16));
  ops.push_back(fixed("Conv2d", 1, conv));

  ParamSchema dw = spatial_schema(true, 5);
  dw.insert(dw.begin(), en("depth_multiplier", {std::int64_t{1}, std::int64_t{2}}));
  ops.push_back(fixed("DepthwiseConv2d", 1, dw));

  ops.push_back(fixed("BiasAdd", 1));
  for (const char* name : {"Add", "Mul", "Sub", "RealDiv"}) ops.push_back(fixed(name, 2));
  for (const char* name : {"Relu", "Relu6", "Sigmoid", "Tanh", "Softmax"}) ops.push_back(fixed(name, 1));
  ops.push_back(fixed("MaxPool", 1, spatial_schema(false, 4)));
  ops.push_back(fixed("AvgPool", 1, spatial_schema(false, 4)));

  OperatorKind concat{"Concat", ArityClass::kVariadic, 2, 2,
                      {en("axis", {std::int64_t{1}, std::int64_t{2}, std::int64_t{3}})}};
  ops.push_back(concat);

  ops.push_back(fixed("Reshape", 1, {sd("shape")}));
  std::vector<ParamValue> perms;
  for (const auto& p : std::vector<std::vector<std::int64_t>>{
           {0, 1, 2, 3}, {0, 1, 3, 2}, {0, 2, 1, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {0, 3, 2, 1}}) {
    perms.emplace_back(p);
  }
  ops.push_back(fixed("Transpose", 1, {en("perm", perms)}));
  ops.push_back(fixed("Slice", 1, {sd("begin"), sd("size")}));
  ops.push_back(fixed("Pad", 1, {sd("pads")}));
  ops.push_back(fixed("Cast", 1,
                      {en("to", {std::string("f32"), std::string("i32"), std::string("i8")})}));
  return ops;
}

}  // namespace

const std::vector<OperatorKind>& builtin_operators() {
  static const std::vector<OperatorKind> registry = make_registry();
  return registry;
}

const OperatorKind* find_builtin(std::string_view name) {
  for (const auto& op : builtin_operators())
    if (op.name == name) return &op;
  return nullptr;
}

bool is_builtin(std::string_view name) { return find_builtin(name) != nullptr; }

int min_inputs(std::string_view op) {
  const OperatorKind* k = find_builtin(op);
  return k ? k->min_inputs : 1;
}

bool is_variadic(std::string_view op) {
  const OperatorKind* k = find_builtin(op);
  return k && k->arity_class == ArityClass::kVariadic;
}

bool is_aggregation(std::string_view op) {
  return op == "Add" || op == "Mul" || op == "Sub" || op == "RealDiv" || op == "Concat";
}

bool requires_f32(std::string_view op) {
  static constexpr std::string_view kF32Only[] = {
      "Conv2d", "DepthwiseConv2d", "BiasAdd", "Add",  "Mul",     "Sub",     "RealDiv",
      "Sigmoid", "Tanh",           "Softmax", "MaxPool", "AvgPool"};
  return std::find(std::begin(kF32Only), std::end(kF32Only), op) != std::end(kF32Only);
}

bool is_padded_spatial(std::string_view op) {
  return op == "Conv2d" || op == "DepthwiseConv2d" || op == "MaxPool" || op == "AvgPool";
}

ParamSchema default_schema(std::string_view op) {
  const OperatorKind* k = find_builtin(op);
  return k ? k->params : ParamSchema{};
}

}  // namespace gfuzz
