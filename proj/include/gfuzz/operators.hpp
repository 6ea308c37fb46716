#pragma once

#include <string_view>
#include <vector>

#include "gfuzz/ir.hpp"

namespace gfuzz {

// The operators both built-in interpreters execute. Corpus entries may name
// other operators; those are only runnable on an external engine.
const std::vector<OperatorKind>& builtin_operators();
const OperatorKind* find_builtin(std::string_view name);
bool is_builtin(std::string_view name);

// Minimum input count used for wiring; 1 for unknown operators.
int min_inputs(std::string_view op);
bool is_variadic(std::string_view op);

// Multi-input operators whose inputs must agree in shape (and dtype).
bool is_aggregation(std::string_view op);
// Operators that only accept f32 operands.
bool requires_f32(std::string_view op);
// Conv/pool family whose padding is solved to keep H and W unchanged.
bool is_padded_spatial(std::string_view op);

// Schema declared for `op`: the builtin schema, or empty for foreign ops.
ParamSchema default_schema(std::string_view op);

}  // namespace gfuzz
