#include "msr2/cli_commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "msr2/metrics.hpp"
#include "msr2/toy_env.hpp"

namespace msr2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string escape_field(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (c == '\t') {
      out += "\\t";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\\') {
      out += "\\\\";
    } else {
      out += c;
    }
  }
  return out;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_url(const std::string& s) { return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0; }

IntervalTable app_table(const AppConfig& config) {
  return config.interval_table ? IntervalTable::load(*config.interval_table) : IntervalTable();
}

}  // namespace

EmbedderFactory app_embedder_factory(const AppConfig& config) {
  return [endpoint = config.embedder](const std::string& kind, std::size_t dim) -> std::shared_ptr<const Embedder> {
    if (kind == "hashing") return std::make_shared<HashingEmbedder>(dim);
    if (kind == "remote") {
      if (!endpoint) throw Error(ErrorCode::EmbedderUnavailable, "source needs MSR2_EMBEDDER_URL or endpoints.embedder");
      return std::make_shared<RemoteEmbedder>(*endpoint, dim);
    }
    throw Error(ErrorCode::EmbedderUnavailable, "no embedder available for kind '" + kind + "'");
  };
}

std::shared_ptr<SourceRegistry> load_app_registry(const AppConfig& config) {
  auto registry = load_registry(config.registry_dir, app_embedder_factory(config));
  for (const auto& [tag, id] : config.aliases) registry->add_alias(tag, id);
  return registry;
}

int cmd_index(const IndexOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err) {
  if (opts.source_id.empty() || opts.source_id.find('/') != std::string::npos || opts.source_id[0] == '.') {
    throw Error(ErrorCode::InvalidConfig, "--source-id must be a plain directory name");
  }
  const auto strategy = index_strategy_from_string(opts.strategy);
  auto records = read_corpus_jsonl(opts.corpus);
  std::shared_ptr<const Embedder> embedder;
  if (strategy != IndexStrategy::Lexical) {
    embedder = config.embedder ? std::shared_ptr<const Embedder>(std::make_shared<RemoteEmbedder>(*config.embedder, opts.embed_dim))
                               : std::make_shared<HashingEmbedder>(opts.embed_dim);
  }
  RetrievalParams params;
  params.hnsw.seed = config.seed;
  const auto source = IndexedSource::build(opts.source_id, strategy, std::move(records), embedder, params);

  fs::create_directories(config.registry_dir);
  save_source(*source, config.registry_dir / opts.source_id);
  RegistryMeta meta;
  if (fs::exists(config.registry_dir / "registry.json")) meta = read_registry_meta(config.registry_dir);
  meta.aliases[opts.source_id] = opts.source_id;
  for (const auto& a : opts.aliases) {
    auto it = meta.aliases.find(a);
    if (it != meta.aliases.end() && it->second != opts.source_id) {
      err << "warning: alias '" << a << "' moves from '" << it->second << "' to '" << opts.source_id << "'\n";
    }
    meta.aliases[a] = opts.source_id;
  }
  if (opts.make_default || meta.default_source.empty()) meta.default_source = opts.source_id;
  write_registry_meta(config.registry_dir, meta);

  out << "source\t" << opts.source_id << "\n";
  out << "strategy\t" << to_string(strategy) << "\n";
  out << "records\t" << source->records().size() << "\n";
  out << "terms\t" << (source->lexical_index() ? source->lexical_index()->term_count() : 0) << "\n";
  out << "embed_dim\t" << source->embed_dim() << "\n";
  return 0;
}

int cmd_search(const SearchOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err) {
  if (opts.k == 0) throw Error(ErrorCode::InvalidConfig, "--k must be at least 1");
  const auto registry = load_app_registry(config);
  SearchAction action{opts.query, opts.source_tag};
  const auto decision = route(*registry, action);
  if (decision.warning) {
    err << "warning: " << (opts.source_tag ? "unknown source tag '" + *opts.source_tag + "'" : "no source tag")
        << "; using default source '" << decision.source_id << "'\n";
  }
  const auto hits = top_k(*registry, decision.source_id, opts.query, opts.k);
  out << "rank\tsource\tdoc\tscore\ttext\n";
  for (const auto& e : hits) {
    out << e.rank << '\t' << e.source_id << '\t' << e.doc_id << '\t' << fixed(e.score) << '\t' << escape_field(e.text)
        << '\n';
  }
  return 0;
}

int cmd_rollout(const RolloutOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err) {
  if (opts.samples == 0) throw Error(ErrorCode::InvalidConfig, "--samples must be at least 1");
  std::string fact = read_text(opts.fact_file);
  while (!fact.empty() && (fact.back() == '\n' || fact.back() == '\r')) fact.pop_back();
  if (fact.empty()) throw Error(ErrorCode::InvalidConfig, opts.fact_file.string() + " holds no fact text");
  const auto registry = load_app_registry(config);

  GeneratorFactory factory;
  if (opts.generator == "mock") {
    if (!opts.script) throw Error(ErrorCode::InvalidConfig, "the mock generator needs --script");
    std::vector<std::string> turns;
    try {
      turns = json::parse(read_text(*opts.script)).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, opts.script->string() + ": expected a JSON array of strings");
    }
    factory = [turns] { return std::make_unique<ScriptedGenerator>(turns); };
  } else if (is_url(opts.generator)) {
    Endpoint endpoint = config.generator.value_or(Endpoint{});
    endpoint.url = opts.generator;
    factory = [endpoint] { return std::make_unique<RemoteGenerator>(endpoint); };
  } else {
    throw Error(ErrorCode::InvalidConfig, "--generator must be 'mock' or an http(s) URL");
  }

  std::vector<Trajectory> trajectories;
  try {
    trajectories = run_group(fact, factory, opts.samples, *registry, config.rollout, config.jobs);
  } catch (const RolloutAbortedError& e) {
    if (!opts.out.empty()) write_trace(opts.out.string() + ".partial", {e.partial()});
    err << "partial trajectory written to " << opts.out.string() << ".partial\n";
    throw;
  }
  for (const auto& t : trajectories) {
    for (const auto& turn : t.turns) {
      if (turn.route_warning) {
        err << "warning: search tag '" << (turn.search->source_tag ? *turn.search->source_tag : "")
            << "' routed to default source '" << turn.routed_source << "'\n";
      }
    }
  }
  write_trace(opts.out, trajectories);
  out << "sample\tterminal\tbudget_used\tsearch_count\tanswer\n";
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    const auto answer = final_answer(t.segments);
    out << i << '\t' << to_string(t.terminal) << '\t' << t.budget_used << '\t' << t.search_count << '\t'
        << escape_field(answer ? *answer : "") << '\n';
  }
  return 0;
}

int cmd_score(const ScoreOptions& opts, const AppConfig& config, std::ostream& out, std::ostream&) {
  const SentenceValue gold{opts.gold_months};
  if (!is_valid_sentence(gold)) throw Error(ErrorCode::InvalidConfig, "--gold must lie in (0, 600] months");
  const auto rubric =
      config.rubric ? RubricTemplate::load(*config.rubric, config.allow_modified_rubric) : RubricTemplate::builtin();
  std::shared_ptr<Judge> upstream;
  if (opts.judge == "mock") {
    if (opts.judge_reply.empty()) throw Error(ErrorCode::InvalidConfig, "the mock judge needs --judge-reply");
    upstream = std::make_shared<ScriptedJudge>(opts.judge_reply);
  } else if (is_url(opts.judge)) {
    Endpoint endpoint = config.judge.value_or(Endpoint{});
    endpoint.url = opts.judge;
    upstream = std::make_shared<RemoteJudge>(endpoint);
  } else {
    throw Error(ErrorCode::InvalidConfig, "--judge must be 'mock' or an http(s) URL");
  }
  CachingJudge judge(upstream);
  const auto table = app_table(config);
  out << "sample\toutcome\tprocess\tlambda_r\ttotal\tjudge_scores\tjudge_parse_failures\n";
  const auto trajectories = read_trace(opts.trace);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    const auto r = score_segments(t.input_fact, t.segments, gold, table, judge, config.lambda_r, rubric);
    std::string scores;
    for (const int s : r.judge_scores) scores += (scores.empty() ? "" : ",") + std::to_string(s);
    out << i << '\t' << r.outcome_O << '\t' << fixed(r.process_P) << '\t' << fixed(r.lambda_r) << '\t'
        << fixed(r.total_R) << '\t' << (scores.empty() ? "-" : scores) << '\t' << r.judge_parse_failures << '\n';
  }
  return 0;
}

int cmd_train_toy(const TrainToyOptions& opts, const AppConfig& config, std::ostream& out, std::ostream& err) {
  TrainToyConfig cfg;
  cfg.steps = opts.steps;
  cfg.lambda_r = config.lambda_r;
  cfg.seed = config.seed;
  cfg.facts_per_step = config.toy_facts_per_step;
  cfg.grpo = config.grpo;
  cfg.grpo.group_size_G = opts.group_size;
  cfg.grpo.learning_rate = config.toy_learning_rate;
  cfg.rollout = config.rollout;
  cfg.validate();
  if (opts.out.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");

  out << toy_metrics_header() << '\n';
  const auto result = train_toy(cfg, [&](const ToyStepMetrics& m) { out << toy_metrics_row(m) << '\n' << std::flush; });
  write_toy_run(opts.out, cfg, result);
  err << "trailing-10 mean reward " << fixed(trailing_mean_reward(result.curve, 10), 4) << "; run written to "
      << opts.out.string() << '\n';
  return 0;
}

int cmd_eval(const EvalOptions& opts, const AppConfig& config, std::ostream& out, std::ostream&) {
  const auto table = app_table(config);
  const auto records = read_predictions(opts.pred);
  const double acc = accuracy(records, table);
  const auto prf = macro_prf(records, table);
  const auto cm = confusion_matrix(records, table);
  long long unparsable = 0;
  for (const auto& row : cm.counts) unparsable += row[ConfusionMatrix::kUnparsable];

  out << "metric\tvalue\n";
  out << "records\t" << records.size() << '\n';
  out << "accuracy\t" << fixed(acc) << '\n';
  out << "macro_precision\t" << fixed(prf.precision) << '\n';
  out << "macro_recall\t" << fixed(prf.recall) << '\n';
  out << "macro_f1\t" << fixed(prf.f1) << '\n';
  out << "unparsable\t" << unparsable << '\n';
  out << "macro_classes\t" << kNumSentenceClasses << '\n';

  if (opts.summary) {
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (int c = 0; c < kNumSentenceClasses; ++c) {
      const auto& s = prf.per_class[c];
      per_class.push_back({{"class", c}, {"support", s.support}, {"precision", s.precision}, {"recall", s.recall},
                           {"f1", s.f1}});
    }
    nlohmann::ordered_json summary{{"records", records.size()},
                                   {"accuracy", acc},
                                   {"macro_precision", prf.precision},
                                   {"macro_recall", prf.recall},
                                   {"macro_f1", prf.f1},
                                   {"unparsable", unparsable},
                                   {"macro_average", "all 10 classes; 0 for undefined precision or recall"},
                                   {"interval_upper_bounds", table.upper_bounds()},
                                   {"per_class", per_class}};
    std::ofstream s(*opts.summary, std::ios::binary | std::ios::trunc);
    if (!s) throw Error(ErrorCode::IoError, "cannot write " + opts.summary->string());
    s << summary.dump(2) << '\n';
  }
  return 0;
}

}  // namespace msr2
