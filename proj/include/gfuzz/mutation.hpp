#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfuzz/ir.hpp"
#include "gfuzz/rng.hpp"

namespace gfuzz {

enum class MutationKind { kGEA, kGER, kBNA, kBNR, kTSM, kPM };

std::string_view mutation_name(MutationKind k);
MutationKind mutation_from_name(std::string_view name);
bool is_model_level(MutationKind k);

struct MutationConfig {
  std::vector<double> r_choices{0.0, 0.1, 0.2};
  std::vector<MutationKind> enabled{MutationKind::kGEA, MutationKind::kGER, MutationKind::kBNA,
                                    MutationKind::kBNR, MutationKind::kTSM, MutationKind::kPM};

  // Throws ConfigError.
  void validate() const;
};

struct AppliedMutation {
  MutationKind kind;
  double r = 0.0;  // model-level only
};

struct MutationAction {
  std::vector<std::string> blocks;       // bs: the blocks chosen this round
  std::vector<AppliedMutation> mutations;  // ms, in application order

  bool has(MutationKind k) const;
};

// Non-empty subset of the enabled mutations, each with its own r drawn from
// r_choices. Model-level entries come first in GEA, GER, BNA, BNR order.
MutationAction select_mutations(const MutationConfig& cfg, Rng& rng);

struct MutationStats {
  int requested = 0;
  int applied = 0;
  bool shortfall() const { return applied < requested; }
};

// Edge addition: ceil(node_count * r) new edges between topologically
// ordered pairs whose blocks accept the extra degree.
MutationStats gea(Graph& g, double r, Rng& rng);
// Edge removal: floor(node_count * r) edges whose removal keeps both
// endpoints inside their ranges and every target with at least one input.
MutationStats ger(Graph& g, double r, Rng& rng);
// Per subgraph instance, with probability r, duplicate one member.
MutationStats bna(Graph& g, double r, Rng& rng);
// Per subgraph instance, with probability r, remove one member.
MutationStats bnr(Graph& g, double r, Rng& rng);

// Duplicates `member` of the instance at `node`. Returns false if the
// instance cannot take a copy.
bool duplicate_member(Graph& g, int node, int member);
// Removes `member` from the instance at `node`, bypassing it. Returns false
// (leaving g untouched) when the removal would orphan an input slot, starve
// a member, or leave no inner edge.
bool remove_member(Graph& g, int node, int member);

struct ShapeDomain {
  std::vector<std::int64_t> n{1};
  std::vector<std::int64_t> h{4, 8, 16, 32, 64};
  std::vector<std::int64_t> w{4, 8, 16, 32, 64};
  std::vector<std::int64_t> c{1, 3, 4, 8, 16};
};

// Resamples one or more dimensions from the domain.
Shape tsm(const Shape& shape, const ShapeDomain& domain, Rng& rng);

// Resamples every enumerated or ranged param in `schema`; shape-dependent
// params are left to the shape calculator.
ParamMap pm(const ParamMap& params, const ParamSchema& schema, Rng& rng);

// Fixed values used for shape-free params when PM is off: the first
// enumerated value or the low end of the range.
ParamMap default_params(const ParamSchema& schema);

}  // namespace gfuzz
