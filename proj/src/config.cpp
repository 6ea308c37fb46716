#include <cmath>
#include <set>

#include "gfuzz/error.hpp"
#include "gfuzz/harness.hpp"
#include "gfuzz/io.hpp"

namespace gfuzz {

using nlohmann::json;

void CampaignConfig::validate() const {
  if (tc0 < 1) throw ConfigError("tc0 must be >= 1");
  if (blocks_min < 1 || blocks_max < blocks_min) throw ConfigError("blocks: need 1 <= min <= max");
  if (k_choices.empty()) throw ConfigError("generation.k must not be empty");
  for (int k : k_choices)
    if (k < 2) throw ConfigError("generation.k values must be >= 2");
  for (double p : {p_ws, p_rn})
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("generation probabilities must lie in (0, 1]");
  mutation.validate();
  coverage.validate();
  search.validate();
  if (!(timeout_s > 0)) throw ConfigError("backend.timeout_s must be positive");
  if (generation_retries < 1) throw ConfigError("generation_retries must be >= 1");
  if (max_rounds < 0) throw ConfigError("max_rounds must be >= 0");
  if (base_shapes.empty()) throw ConfigError("input_shapes must not be empty");
  for (const auto& s : base_shapes) {
    if (s.size() != 4) throw ConfigError("input_shapes entries must be rank 4");
    for (auto d : s)
      if (d < 1) throw ConfigError("input_shapes dims must be >= 1");
  }
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

std::array<double, 5> weights(const json& j, const std::string& where) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 5) throw ConfigError(where + ": expected 5 weights");
  return {v[0], v[1], v[2], v[3], v[4]};
}

const char* gate_name(CoverageGate g) {
  switch (g) {
    case CoverageGate::kEither: return "either";
    case CoverageGate::kSetOnly: return "set";
    case CoverageGate::kOperatorOnly: return "operator";
  }
  return "either";
}

const char* topology_name(TopologyChoice t) {
  switch (t) {
    case TopologyChoice::kWS: return "ws";
    case TopologyChoice::kRN: return "rn";
    case TopologyChoice::kBoth: return "both";
  }
  return "both";
}

}  // namespace

CampaignConfig parse_campaign_config(std::string_view text) {
  CampaignConfig cfg;
  try {
    const json j = json::parse(text);
    check_keys(j, "config",
               {"tc0", "blocks", "generation", "mutation", "coverage", "search", "backend", "master_seed",
                "generation_retries", "execute_discarded", "max_rounds", "input_shapes"});
    if (j.contains("tc0")) cfg.tc0 = j["tc0"].get<int>();
    if (j.contains("blocks")) {
      const auto b = j["blocks"].get<std::vector<int>>();
      if (b.size() != 2) throw ConfigError("blocks: expected [min, max]");
      cfg.blocks_min = b[0];
      cfg.blocks_max = b[1];
    }
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      check_keys(g, "generation", {"k", "p_ws", "p_rn", "model"});
      if (g.contains("k")) cfg.k_choices = g["k"].get<std::vector<int>>();
      if (g.contains("p_ws")) cfg.p_ws = g["p_ws"].get<double>();
      if (g.contains("p_rn")) cfg.p_rn = g["p_rn"].get<double>();
      if (g.contains("model")) {
        const auto m = g["model"].get<std::string>();
        if (m == "ws") cfg.topology = TopologyChoice::kWS;
        else if (m == "rn") cfg.topology = TopologyChoice::kRN;
        else if (m == "both") cfg.topology = TopologyChoice::kBoth;
        else throw ConfigError("generation.model must be ws, rn or both");
      }
    }
    if (j.contains("mutation")) {
      const auto& m = j["mutation"];
      check_keys(m, "mutation", {"r", "enabled", "on"});
      if (m.contains("r")) cfg.mutation.r_choices = m["r"].get<std::vector<double>>();
      if (m.contains("enabled")) {
        cfg.mutation.enabled.clear();
        for (const auto& name : m["enabled"].get<std::vector<std::string>>())
          cfg.mutation.enabled.push_back(mutation_from_name(name));
      }
      if (m.contains("on")) cfg.mutations = m["on"].get<bool>();
    }
    if (j.contains("coverage")) {
      const auto& c = j["coverage"];
      check_keys(c, "coverage", {"n_maxspc", "weights_op", "weights_set", "gate"});
      if (c.contains("n_maxspc")) cfg.coverage.n_maxspc = c["n_maxspc"].get<int>();
      if (c.contains("weights_op")) cfg.coverage.weights_op = weights(c["weights_op"], "coverage.weights_op");
      if (c.contains("weights_set")) cfg.coverage.weights_set = weights(c["weights_set"], "coverage.weights_set");
      if (c.contains("gate")) {
        const auto g = c["gate"].get<std::string>();
        if (g == "either") cfg.coverage.gate = CoverageGate::kEither;
        else if (g == "set") cfg.coverage.gate = CoverageGate::kSetOnly;
        else if (g == "operator") cfg.coverage.gate = CoverageGate::kOperatorOnly;
        else throw ConfigError("coverage.gate must be either, set or operator");
      }
    }
    if (j.contains("search")) {
      const auto& s = j["search"];
      check_keys(s, "search", {"mode", "e", "tc1", "tc2", "max_children"});
      if (s.contains("mode")) {
        const auto m = s["mode"].get<std::string>();
        if (m == "mcts") cfg.search.mode = SearchMode::kMcts;
        else if (m == "random") cfg.search.mode = SearchMode::kRandom;
        else throw ConfigError("search.mode must be mcts or random");
      }
      if (s.contains("e")) cfg.search.e = s["e"].get<double>();
      if (s.contains("tc1")) cfg.search.tc1 = s["tc1"].get<int>();
      if (s.contains("tc2")) cfg.search.tc2 = s["tc2"].get<int>();
      if (s.contains("max_children")) cfg.search.max_children = s["max_children"].get<int>();
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      check_keys(b, "backend", {"engine", "timeout_s", "bug_mask", "fuse"});
      if (b.contains("engine")) cfg.engine_cmd = b["engine"].get<std::string>();
      if (b.contains("timeout_s")) cfg.timeout_s = b["timeout_s"].get<double>();
      if (b.contains("bug_mask")) cfg.bugs = parse_bug_mask(b["bug_mask"].get<std::string>());
      if (b.contains("fuse")) cfg.fuse = b["fuse"].get<bool>();
    }
    if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("generation_retries")) cfg.generation_retries = j["generation_retries"].get<int>();
    if (j.contains("execute_discarded")) cfg.execute_discarded = j["execute_discarded"].get<bool>();
    if (j.contains("max_rounds")) cfg.max_rounds = j["max_rounds"].get<int>();
    if (j.contains("input_shapes")) cfg.base_shapes = j["input_shapes"].get<std::vector<Shape>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) { return parse_campaign_config(read_file(path)); }

json campaign_config_json(const CampaignConfig& cfg) {
  std::vector<std::string> enabled;
  for (auto k : cfg.mutation.enabled) enabled.emplace_back(mutation_name(k));
  return {
      {"tc0", cfg.tc0},
      {"blocks", {cfg.blocks_min, cfg.blocks_max}},
      {"generation", {{"k", cfg.k_choices}, {"p_ws", cfg.p_ws}, {"p_rn", cfg.p_rn}, {"model", topology_name(cfg.topology)}}},
      {"mutation", {{"r", cfg.mutation.r_choices}, {"enabled", enabled}, {"on", cfg.mutations}}},
      {"coverage",
       {{"n_maxspc", cfg.coverage.n_maxspc},
        {"weights_op", cfg.coverage.weights_op},
        {"weights_set", cfg.coverage.weights_set},
        {"gate", gate_name(cfg.coverage.gate)}}},
      {"search",
       {{"mode", cfg.search.mode == SearchMode::kMcts ? "mcts" : "random"},
        {"e", cfg.search.e},
        {"tc1", cfg.search.tc1},
        {"tc2", cfg.search.tc2},
        {"max_children", cfg.search.max_children}}},
      {"backend",
       {{"engine", cfg.engine_cmd}, {"timeout_s", cfg.timeout_s}, {"bug_mask", bug_mask_string(cfg.bugs)}, {"fuse", cfg.fuse}}},
      {"master_seed", cfg.master_seed},
      {"generation_retries", cfg.generation_retries},
      {"execute_discarded", cfg.execute_discarded},
      {"max_rounds", cfg.max_rounds},
      {"input_shapes", cfg.base_shapes},
  };
}

}  // namespace gfuzz
