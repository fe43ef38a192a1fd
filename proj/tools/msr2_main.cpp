// msr2: index, search, rollout, score, train-toy, eval.

#include <iostream>

#include "CLI11.hpp"
#include "msr2/cli_commands.hpp"

namespace {

constexpr int kUsageError = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace msr2;
  CLI::App app{"Multi-source retrieval rollouts, rewards and GRPO on a desk-scale engine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> registry;
  std::optional<std::string> table;
  std::optional<std::string> rubric;
  bool allow_modified_rubric = false;
  app.add_option("--config", config_file, "JSON config file (flags > MSR2_* env > config)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for index graphs, mock rollouts and toy training");
  app.add_option("--jobs", jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--registry", registry, "Registry directory");
  app.add_option("--table", table, "Interval table JSON ({\"boundaries\": [9 months]})");
  app.add_option("--rubric", rubric, "Judge rubric template file");
  app.add_flag("--allow-modified-rubric", allow_modified_rubric, "Accept a rubric whose digest is not the pinned one");

  IndexOptions index;
  auto* index_cmd = app.add_subcommand("index", "Build and persist one retrieval source");
  index_cmd->add_option("--corpus", index.corpus, "JSONL corpus (doc_id, text, metadata)")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--source-id", index.source_id, "Source id (directory name)")->required();
  index_cmd->add_option("--strategy", index.strategy, "Index strategy")
      ->check(CLI::IsMember({"lexical", "dense-exact", "dense-approx", "hybrid"}))
      ->capture_default_str();
  index_cmd->add_option("--alias", index.aliases, "Search tag routed to this source (repeatable)");
  index_cmd->add_flag("--default", index.make_default, "Make this the default source");
  index_cmd->add_option("--embed-dim", index.embed_dim, "Embedding dimension")->check(CLI::PositiveNumber)->capture_default_str();

  SearchOptions search;
  std::optional<std::string> search_source;
  long long search_k = static_cast<long long>(kDefaultTopK);
  auto* search_cmd = app.add_subcommand("search", "Top-k retrieval from a routed source");
  search_cmd->add_option("--source", search_source, "Source tag; unknown or absent uses the default source");
  search_cmd->add_option("--query", search.query, "Query text")->required();
  search_cmd->add_option("--k", search_k, "Number of results")->check(CLI::PositiveNumber)->capture_default_str();

  RolloutOptions rollout;
  std::optional<int> budget;
  std::optional<std::size_t> top_k;
  auto* rollout_cmd = app.add_subcommand("rollout", "Run rollouts and write a trace file");
  rollout_cmd->add_option("--fact-file", rollout.fact_file, "Text file holding the case facts")->required()->check(CLI::ExistingFile);
  rollout_cmd->add_option("--generator", rollout.generator, "'mock' or an endpoint URL")->capture_default_str();
  rollout_cmd->add_option("--script", rollout.script, "Mock generator turns (JSON array of strings)")->check(CLI::ExistingFile);
  rollout_cmd->add_option("--budget", budget, "Turn budget B (default 8)")->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--top-k", top_k, "Evidence items per search (default 3)")->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--samples", rollout.samples, "Rollouts of the same fact")->check(CLI::PositiveNumber)->capture_default_str();
  rollout_cmd->add_option("--out", rollout.out, "Trace file (JSON lines)")->required();

  ScoreOptions score;
  std::optional<double> score_lambda;
  auto* score_cmd = app.add_subcommand("score", "Replay rewards over a trace file");
  score_cmd->add_option("--trace", score.trace, "Trace file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--gold", score.gold_months, "Gold sentence in months")->required();
  score_cmd->add_option("--judge", score.judge, "'mock' or an endpoint URL")->capture_default_str();
  score_cmd->add_option("--judge-reply", score.judge_reply, "Fixed reply of the mock judge");
  score_cmd->add_option("--lambda-r", score_lambda, "Process reward weight (default 0.2)")->check(CLI::Range(0.0, 1.0));

  TrainToyOptions train;
  std::optional<double> train_lambda;
  std::optional<std::uint64_t> train_seed;
  std::optional<double> train_lr;
  auto* train_cmd = app.add_subcommand("train-toy", "GRPO on the synthetic four-source routing task");
  train_cmd->add_option("--steps", train.steps, "Optimizer steps")->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--group-size", train.group_size, "Rollouts per fact (G)")->check(CLI::Range(2, 1024))->capture_default_str();
  train_cmd->add_option("--lambda-r", train_lambda, "Process reward weight (default 0.2)")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--seed", train_seed, "Run seed (overrides the global --seed)");
  train_cmd->add_option("--learning-rate", train_lr, "Toy step size (default 8)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train.out, "Run directory")->required();

  EvalOptions eval;
  std::optional<std::string> eval_summary;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and macro P/R/F1 over a prediction file");
  eval_cmd->add_option("--pred", eval.pred, "JSONL predictions (case_id, gold_months, pred_months)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--summary", eval_summary, "Write a JSON summary here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    AppConfig config;
    if (!config_file.empty()) config.merge_file(config_file);
    config.merge_env();
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;
    if (registry) config.registry_dir = *registry;
    if (table) config.interval_table = *table;
    if (rubric) config.rubric = *rubric;
    if (allow_modified_rubric) config.allow_modified_rubric = true;
    if (budget) config.rollout.budget_B = *budget;
    if (top_k) config.rollout.top_k = *top_k;
    if (score_lambda) config.lambda_r = *score_lambda;
    if (train_lambda) config.lambda_r = *train_lambda;
    if (train_seed) config.seed = *train_seed;
    if (train_lr) config.toy_learning_rate = *train_lr;
    config.validate();

    if (*index_cmd) return cmd_index(index, config, std::cout, std::cerr);
    if (*search_cmd) {
      search.source_tag = search_source;
      search.k = static_cast<std::size_t>(search_k);
      return cmd_search(search, config, std::cout, std::cerr);
    }
    if (*rollout_cmd) return cmd_rollout(rollout, config, std::cout, std::cerr);
    if (*score_cmd) return cmd_score(score, config, std::cout, std::cerr);
    if (*train_cmd) return cmd_train_toy(train, config, std::cout, std::cerr);
    if (*eval_cmd) {
      if (eval_summary) eval.summary = *eval_summary;
      return cmd_eval(eval, config, std::cout, std::cerr);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidConfig ? kUsageError : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
