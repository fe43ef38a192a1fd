#pragma once

// Subcommand bodies behind the msr2 binary. Each returns the process exit
// code and throws msr2::Error on failure.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msr2/app_config.hpp"
#include "msr2/index_store.hpp"

namespace msr2 {

/// Hashing embedder always; "remote" when the config names an endpoint.
EmbedderFactory app_embedder_factory(const AppConfig& config);

/// load_registry plus the config's extra aliases.
std::shared_ptr<SourceRegistry> load_app_registry(const AppConfig& config);

struct IndexOptions {
  std::filesystem::path corpus;
  std::string source_id;
  std::string strategy = "lexical";
  std::vector<std::string> aliases;
  bool make_default = false;
  std::size_t embed_dim = kDefaultEmbedDim;
};

/// Builds and saves one source, registers its id (and aliases) as tags.
int cmd_index(const IndexOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err);

struct SearchOptions {
  std::optional<std::string> source_tag;
  std::string query;
  std::size_t k = kDefaultTopK;
};

/// Prints "rank source doc score text" as TSV with a header line. Tabs and
/// newlines inside text are written as \t and \n.
int cmd_search(const SearchOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err);

struct RolloutOptions {
  std::filesystem::path fact_file;
  /// "mock" or an http(s) URL.
  std::string generator = "mock";
  /// JSON array of per-turn strings for the mock generator.
  std::optional<std::filesystem::path> script;
  std::size_t samples = 1;
  std::filesystem::path out;
};

int cmd_rollout(const RolloutOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err);

struct ScoreOptions {
  std::filesystem::path trace;
  double gold_months = 0;
  /// "mock" or an http(s) URL.
  std::string judge = "mock";
  /// Fixed reply of the mock judge.
  std::string judge_reply;
};

/// Offline reward replay over a trace file: one TSV row per trajectory.
int cmd_score(const ScoreOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err);

struct TrainToyOptions {
  int steps = 500;
  int group_size = 8;
  std::filesystem::path out;
};

/// Streams metrics.tsv rows to `out` and writes the run directory.
int cmd_train_toy(const TrainToyOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err);

struct EvalOptions {
  std::filesystem::path pred;
  std::optional<std::filesystem::path> summary;
};

/// Prints "metric value" TSV; `summary` receives the JSON form.
int cmd_eval(const EvalOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err);

}  // namespace msr2
