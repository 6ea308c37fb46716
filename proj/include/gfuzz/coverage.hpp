#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gfuzz/ir.hpp"

namespace gfuzz {

enum class CoverageGate { kEither, kSetOnly, kOperatorOnly };

struct CoverageConfig {
  int n_maxspc = 200;
  std::array<double, 5> weights_op{1, 1, 1, 1, 1};
  std::array<double, 5> weights_set{1, 1, 1, 1, 1};
  CoverageGate gate = CoverageGate::kEither;

  // Throws ConfigError.
  void validate() const;
};

struct OperatorObservation {
  std::set<int> in_degrees;
  std::set<int> out_degrees;
  std::set<std::string> successors;
  std::set<std::string> sp_vectors;  // stored uncapped
  bool seen = false;
  friend bool operator==(const OperatorObservation&, const OperatorObservation&) = default;
};

struct MetricRow {
  double otc = 0, idc = 0, odc = 0, sec = 0, spc = 0, olc = 0;
};

// Canonical shape&param vector: input shapes and dtypes, then params sorted
// by name. Placeholder "index" params are excluded.
std::string sp_vector(const ModelNode& node, const std::vector<std::string>& input_types);

class CoverageState {
 public:
  CoverageState() = default;
  CoverageState(const BlockCorpus& corpus, CoverageConfig config);

  void observe(const ModelSpec& m);
  // Set union with a state built against the same corpus and config.
  void merge(const CoverageState& other);

  MetricRow op_metrics(const std::string& op) const;
  MetricRow set_metrics() const;
  double olc_op(const std::string& op) const { return op_metrics(op).olc; }
  double olc() const { return set_metrics().olc; }

  // Would observing `batch` raise the set OLC or any operator's OLC?
  bool is_new_coverage(const std::vector<ModelSpec>& batch) const;

  const std::vector<std::string>& operator_types() const { return types_; }
  const std::set<int>& in_range(const std::string& op) const { return in_range_.at(op); }
  const std::set<int>& out_range(const std::string& op) const { return out_range_.at(op); }
  const std::map<std::string, OperatorObservation>& observations() const { return obs_; }
  const std::map<std::string, OperatorObservation>& foreign() const { return foreign_; }
  const CoverageConfig& config() const { return config_; }

  friend bool operator==(const CoverageState& a, const CoverageState& b) {
    return a.types_ == b.types_ && a.obs_ == b.obs_ && a.foreign_ == b.foreign_;
  }

 private:
  CoverageConfig config_;
  std::vector<std::string> types_;
  std::map<std::string, std::set<int>> in_range_;
  std::map<std::string, std::set<int>> out_range_;
  std::map<std::string, OperatorObservation> obs_;
  std::map<std::string, OperatorObservation> foreign_;
};

// Table with one row per corpus operator plus the set row ("I").
std::string coverage_table(const CoverageState& s);
std::string coverage_json(const CoverageState& s);

}  // namespace gfuzz
