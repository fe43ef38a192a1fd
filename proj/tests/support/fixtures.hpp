#pragma once

// Paths to the checked-in fixtures and an in-process copy of the registry
// that tests/cli/cli_test.sh builds with the binary.

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "msr2/corpus.hpp"
#include "msr2/embedder.hpp"
#include "msr2/retrieval.hpp"

#ifndef MSR2_SOURCE_DIR
#error "MSR2_SOURCE_DIR must point at the repository root"
#endif

namespace msr2::testing {

inline std::filesystem::path source_dir() { return MSR2_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }
inline std::filesystem::path golden(const std::string& name) { return source_dir() / "tests" / "golden" / name; }

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

inline std::string fixture_fact() {
  std::string fact = slurp(fixture("fact.txt"));
  while (!fact.empty() && (fact.back() == '\n' || fact.back() == '\r')) fact.pop_back();
  return fact;
}

inline std::vector<std::string> fixture_script(const std::string& name) {
  return nlohmann::json::parse(slurp(fixture("scripts/" + name + ".json"))).get<std::vector<std::string>>();
}

/// Same sources, strategies, aliases and default as the CLI golden registry
/// (global seed 7, 256-d hashing embeddings for the dense sources).
inline std::shared_ptr<SourceRegistry> fixture_registry() {
  auto registry = std::make_shared<SourceRegistry>();
  auto embedder = std::make_shared<HashingEmbedder>(256);
  RetrievalParams params;
  params.hnsw.seed = 7;
  const auto add = [&](const std::string& id, IndexStrategy strategy) {
    auto records = read_corpus_jsonl(fixture("sources/" + id + ".jsonl"));
    registry->add(IndexedSource::build(id, strategy, std::move(records),
                                       strategy == IndexStrategy::Lexical ? nullptr : embedder, params));
    registry->add_alias(id, id);
  };
  add("statute", IndexStrategy::Lexical);
  add("guideline", IndexStrategy::Hybrid);
  add("precedent", IndexStrategy::DenseApprox);
  add("book", IndexStrategy::DenseExact);
  registry->add_alias("case", "precedent");
  registry->set_default("statute");
  return registry;
}

}  // namespace msr2::testing
