#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gfuzz/ir.hpp"

namespace gfuzz {

// Corpus JSON: {"blocks": [{name, members, inner_edges, in_degree,
// out_degree, params?}]}. `params` is one object per member mapping a param
// name to {"enum": [...]}, {"range": [lo, hi]} or "shape"; entries override
// the operator's builtin schema.
BlockCorpus parse_corpus(std::string_view text);
BlockCorpus load_corpus(const std::filesystem::path& path);
std::string corpus_to_json(const BlockCorpus& corpus);

// Canonical model encoding (sorted keys, fixed layout). Re-serializing a
// deserialized model reproduces the same bytes.
std::string serialize_model(const ModelSpec& m);
ModelSpec deserialize_model(std::string_view text);

ModelSpec load_model(const std::filesystem::path& path);
void save_model(const ModelSpec& m, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename. Throws InfraError on failure.
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace gfuzz
