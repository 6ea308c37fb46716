#include <algorithm>
#include <cstdio>

#include "gfuzz/engine.hpp"

namespace gfuzz {

bool ExceptionRegistry::record(const TrialOutcome& o, int model_id) {
  if (o.status == Status::kDCP) return false;
  ++raw_[o.status];
  if (o.status == Status::kDCF && o.culprits.size() == 1) ++solo_[*o.culprits.begin()][o.dedup_key];
  auto [it, fresh] = entries_.try_emplace(o.dedup_key);
  RegistryEntry& e = it->second;
  if (fresh) {
    e.status = o.status;
    e.first_model = model_id;
    e.first = o;
  }
  ++e.count;
  e.defects.insert(o.culprits.begin(), o.culprits.end());
  return fresh;
}

ExceptionRegistry::Totals ExceptionRegistry::totals(Status s) const {
  Totals t;
  for (const auto& [key, e] : entries_) t.dedup += e.status == s;
  auto it = raw_.find(s);
  if (it != raw_.end()) t.raw = it->second;
  return t;
}

std::set<Bug> ExceptionRegistry::detected() const {
  std::set<Bug> out;
  for (const auto& [key, e] : entries_) out.insert(e.defects.begin(), e.defects.end());
  return out;
}

std::optional<double> ExceptionRegistry::dedup_share(Bug b) const {
  auto it = solo_.find(b);
  if (it == solo_.end()) return std::nullopt;
  int total = 0, best = 0;
  for (const auto& [key, c] : it->second) {
    total += c;
    best = std::max(best, c);
  }
  return static_cast<double>(best) / total;
}

nlohmann::json ExceptionRegistry::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, e] : entries_) {
    std::vector<std::string> defects;
    for (Bug b : e.defects) defects.emplace_back(bug_name(b));
    entries.push_back({{"key", key},
                       {"status", status_name(e.status)},
                       {"count", e.count},
                       {"first_model", e.first_model},
                       {"defects", defects},
                       {"first", outcome_json(e.first)}});
  }
  nlohmann::json sums = nlohmann::json::object();
  for (Status s : {Status::kMCF, Status::kIF, Status::kDCF}) {
    const auto t = totals(s);
    sums[std::string(status_name(s))] = {{"dedup", t.dedup}, {"raw", t.raw}};
  }
  return {{"entries", entries}, {"totals", sums}};
}

std::string ExceptionRegistry::table() const {
  std::string out = "Status   Dedup   Total\n";
  char buf[128];
  int dedup = 0, raw = 0;
  for (Status s : {Status::kMCF, Status::kIF, Status::kDCF}) {
    const auto t = totals(s);
    dedup += t.dedup;
    raw += t.raw;
    std::snprintf(buf, sizeof buf, "%-6s %7d %7d\n", std::string(status_name(s)).c_str(), t.dedup, t.raw);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s %7d %7d\n", "all", dedup, raw);
  out += buf;
  if (!entries_.empty()) out += "\nKey                                              Count  First  Defects\n";
  for (const auto& [key, e] : entries_) {
    std::string defects;
    for (Bug b : e.defects) defects += (defects.empty() ? "" : ",") + std::string(bug_name(b));
    std::snprintf(buf, sizeof buf, "%-48s %6d %6d  ", key.c_str(), e.count, e.first_model);
    out += buf + (defects.empty() ? std::string("-") : defects) + "\n";
  }
  return out;
}

}  // namespace gfuzz
