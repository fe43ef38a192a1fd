#pragma once

// On-disk layout of a registry directory:
//
//   DIR/registry.json              default source and tag aliases
//   DIR/<source_id>/manifest.json  format version, strategy, parameters, counts
//   DIR/<source_id>/records.jsonl  corpus records in index order
//   DIR/<source_id>/postings.tsv   term \t df \t doc:tf ... (lexical, hybrid)
//   DIR/<source_id>/doclens.txt    one document length per line
//   DIR/<source_id>/vectors.bin    little-endian float64, one column per record
//
// All files are written deterministically so rebuilding from the same corpus
// produces byte-identical directories.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "msr2/retrieval.hpp"

namespace msr2 {

inline constexpr int kIndexFormatVersion = 1;

/// Builds an embedder for a manifest's (kind, dim). The default factory only
/// knows "hashing".
using EmbedderFactory = std::function<std::shared_ptr<const Embedder>(const std::string& kind, std::size_t dim)>;

EmbedderFactory default_embedder_factory();

void save_source(const IndexedSource& source, const std::filesystem::path& dir);

/// Throws FormatVersion when the manifest version differs from kIndexFormatVersion.
std::shared_ptr<const IndexedSource> load_source(const std::filesystem::path& dir,
                                                 const EmbedderFactory& embedders = default_embedder_factory());

struct RegistryMeta {
  std::string default_source;
  std::map<std::string, std::string> aliases;
};

RegistryMeta read_registry_meta(const std::filesystem::path& dir);
void write_registry_meta(const std::filesystem::path& dir, const RegistryMeta& meta);

/// Loads every source subdirectory and applies registry.json.
std::shared_ptr<SourceRegistry> load_registry(const std::filesystem::path& dir,
                                              const EmbedderFactory& embedders = default_embedder_factory());

}  // namespace msr2
