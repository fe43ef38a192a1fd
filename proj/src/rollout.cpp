#include "msr2/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace msr2 {

using nlohmann::json;

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Search: return "search";
    case ActionKind::Answer: return "answer";
    case ActionKind::Malformed: return "malformed";
  }
  return "malformed";
}

std::string_view to_string(Terminal terminal) {
  return terminal == Terminal::Answered ? "answered" : "budget_exhausted";
}

void RolloutConfig::validate() const {
  if (budget_B <= 0) throw Error(ErrorCode::InvalidConfig, "budget_B must be positive");
  if (top_k == 0) throw Error(ErrorCode::InvalidConfig, "top_k must be positive");
  if (max_prompt_tokens == 0) throw Error(ErrorCode::InvalidConfig, "max_prompt_tokens must be positive");
  if (max_response_tokens == 0) throw Error(ErrorCode::InvalidConfig, "max_response_tokens must be positive");
  for (const char* required : {"</search>", "</answer>"}) {
    if (std::find(stop_tags.begin(), stop_tags.end(), required) == stop_tags.end()) {
      throw Error(ErrorCode::InvalidConfig, std::string("stop_tags must include ") + required);
    }
  }
}

std::size_t Trajectory::generated_token_count() const {
  return static_cast<std::size_t>(std::count(origin_mask.begin(), origin_mask.end(), Origin::Generated));
}

namespace {

bool has_block(std::string_view chunk, std::string_view open, std::string_view close) {
  const auto o = chunk.find(open);
  return o != std::string_view::npos && chunk.find(close, o + open.size()) != std::string_view::npos;
}

// Appends environment-authored text, tokenized with the mock tokenizer.
void append_environment(Trajectory& t, Segment segment) {
  const auto ids = mock_token_ids(render_segment(segment));
  segment.origin = Origin::Environment;
  segment.token_span = {t.tokens.size(), t.tokens.size() + ids.size()};
  t.tokens.insert(t.tokens.end(), ids.begin(), ids.end());
  t.origin_mask.insert(t.origin_mask.end(), ids.size(), Origin::Environment);
  if (!t.logprobs.empty()) t.logprobs.resize(t.tokens.size(), 0.0);
  t.segments.push_back(std::move(segment));
}

// Appends one generated chunk. Generator-supplied ids are spread over the
// chunk's segments in proportion to their mock token counts.
void append_generated(Trajectory& t, std::vector<Segment> segments, const GenerationResult& result) {
  const std::vector<TokenId> ids = result.tokens ? *result.tokens : std::vector<TokenId>{};
  std::vector<std::size_t> counts;
  std::size_t mock_total = 0;
  for (const auto& s : segments) {
    counts.push_back(mock_tokenize(render_segment(s)).size());
    mock_total += counts.back();
  }
  const std::size_t n = ids.size();
  if (!segments.empty() && n != mock_total) {
    std::size_t cum = 0, placed = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      cum += counts[i];
      std::size_t upto = n;
      if (i + 1 < segments.size()) {
        upto = mock_total == 0 ? 0
                               : static_cast<std::size_t>(std::llround(static_cast<double>(n) * static_cast<double>(cum) /
                                                                       static_cast<double>(mock_total)));
      }
      counts[i] = upto - placed;
      placed = upto;
    }
  }
  const bool with_logprobs = result.logprobs.has_value();
  if (with_logprobs && t.logprobs.size() < t.tokens.size()) t.logprobs.resize(t.tokens.size(), 0.0);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    auto& s = segments[i];
    s.origin = Origin::Generated;
    s.token_span = {t.tokens.size(), t.tokens.size() + counts[i]};
    for (std::size_t k = 0; k < counts[i]; ++k, ++cursor) {
      t.tokens.push_back(ids[cursor]);
      t.origin_mask.push_back(Origin::Generated);
      if (with_logprobs) t.logprobs.push_back((*result.logprobs)[cursor]);
    }
    t.segments.push_back(std::move(s));
  }
  if (!with_logprobs && !t.logprobs.empty()) t.logprobs.resize(t.tokens.size(), 0.0);
}

// Segments of one generated chunk. Text that only the environment may author
// (information blocks, the rethink sentence) stays Plain/Generated here.
std::optional<std::vector<Segment>> parse_chunk(const std::string& chunk) {
  std::vector<Segment> segments;
  try {
    segments = parse_trajectory(chunk);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedTag) throw;
    return std::nullopt;
  }
  for (auto& s : segments) {
    if (s.kind == SegmentKind::Information || s.kind == SegmentKind::Rethink) {
      s.text = render_segment(s);
      s.kind = SegmentKind::Plain;
    }
    s.origin = Origin::Generated;
  }
  return segments;
}

}  // namespace

ActionKind classify_action(std::string_view chunk) {
  if (has_block(chunk, "<search>", "</search>")) return ActionKind::Search;
  if (has_block(chunk, "<answer>", "</answer>")) return ActionKind::Answer;
  return ActionKind::Malformed;
}

PromptContext truncate_context(std::string_view fact, const Trajectory& trajectory, const RolloutConfig& config) {
  PromptContext out;
  const auto fact_ids = mock_token_ids(fact);
  if (fact_ids.size() > config.max_prompt_tokens) {
    throw Error(ErrorCode::FactTooLong, "fact has " + std::to_string(fact_ids.size()) + " tokens, limit is " +
                                            std::to_string(config.max_prompt_tokens));
  }
  std::size_t total = fact_ids.size();
  std::size_t first_kept = trajectory.segments.size();
  while (first_kept > 0) {
    const auto n = trajectory.segments[first_kept - 1].token_span.size();
    if (total + n > config.max_prompt_tokens) break;
    total += n;
    --first_kept;
  }
  out.dropped_segments = first_kept;
  out.text = std::string(fact);
  out.text += '\n';
  out.tokens = fact_ids;
  for (std::size_t i = first_kept; i < trajectory.segments.size(); ++i) {
    const auto& s = trajectory.segments[i];
    out.text += render_segment(s);
    out.tokens.insert(out.tokens.end(), trajectory.tokens.begin() + static_cast<std::ptrdiff_t>(s.token_span.begin),
                      trajectory.tokens.begin() + static_cast<std::ptrdiff_t>(s.token_span.end));
  }
  return out;
}

Trajectory run_rollout(std::string_view fact, Generator& generator, const SourceRegistry& registry,
                       const RolloutConfig& config) {
  config.validate();
  if (registry.empty()) throw Error(ErrorCode::UnknownSource, "registry has no sources");
  Trajectory t;
  t.input_fact = std::string(fact);

  while (t.budget_used < config.budget_B) {
    if (t.tokens.size() >= config.max_response_tokens) break;
    const auto context = truncate_context(fact, t, config);
    GenerationRequest request{context.text, context.tokens, config.stop_tags,
                              config.max_response_tokens - t.tokens.size()};
    GenerationResult result;
    try {
      result = generator.generate(request);
    } catch (const std::exception& e) {
      throw RolloutAbortedError(std::string("generator failed on turn ") + std::to_string(t.budget_used + 1) +
                                    ": " + e.what(),
                                std::move(t));
    }
    ++t.budget_used;

    TurnRecord turn;
    turn.chunk = result.text;
    turn.finish = result.finish;
    // One action per turn: anything after the first stop tag is dropped.
    if (apply_stop(turn.chunk, config.stop_tags) && turn.chunk.size() != result.text.size()) {
      result.tokens.reset();
      result.logprobs.reset();
    }
    if (!result.tokens) result.tokens = mock_token_ids(turn.chunk);
    turn.action = classify_action(turn.chunk);

    auto segments = parse_chunk(turn.chunk);
    if (!segments) {
      turn.action = ActionKind::Malformed;
      segments = std::vector<Segment>{{SegmentKind::Plain, turn.chunk, Origin::Generated, {}}};
    }
    const Segment* search_segment = nullptr;
    for (const auto& s : *segments) {
      if (s.kind == SegmentKind::Search) search_segment = &s;
    }
    if (turn.action == ActionKind::Search) {
      try {
        turn.search = search_segment ? std::optional(extract_search(*search_segment)) : std::nullopt;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyQuery) throw;
      }
      if (!turn.search) turn.action = ActionKind::Malformed;
    }
    if (turn.action == ActionKind::Answer &&
        std::none_of(segments->begin(), segments->end(), [](const Segment& s) { return s.kind == SegmentKind::Answer; })) {
      turn.action = ActionKind::Malformed;
    }
    append_generated(t, std::move(*segments), result);

    if (turn.action == ActionKind::Answer) {
      t.turns.push_back(std::move(turn));
      t.terminal = Terminal::Answered;
      return t;
    }
    if (turn.action == ActionKind::Search) {
      ++t.search_count;
      try {
        const auto decision = route(registry, *turn.search);
        turn.routed_source = decision.source_id;
        turn.route_warning = decision.warning;
        try {
          turn.evidence = top_k(registry, decision.source_id, turn.search->query, config.top_k);
        } catch (const Error& e) {
          // A query with no searchable terms retrieves nothing.
          if (e.code() != ErrorCode::EmptyQuery) throw;
        }
      } catch (const std::exception& e) {
        turn.evidence.clear();
        t.turns.push_back(std::move(turn));
        throw RolloutAbortedError(std::string("retrieval failed: ") + e.what(), std::move(t));
      }
      const auto block = turn.evidence.empty() ? render_empty_information() : render_information(turn.evidence);
      append_environment(t, parse_trajectory(block).front());
    } else {
      append_environment(t, {SegmentKind::Rethink, std::string(kRethinkMessage), Origin::Environment, {}});
    }
    t.turns.push_back(std::move(turn));
  }
  t.terminal = Terminal::BudgetExhausted;
  return t;
}

std::vector<Trajectory> run_group(std::string_view fact, const GeneratorFactory& factory, std::size_t group_size,
                                  const SourceRegistry& registry, const RolloutConfig& config,
                                  std::size_t max_concurrency) {
  std::vector<std::unique_ptr<Generator>> generators;
  generators.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) generators.push_back(factory());
  std::vector<Trajectory> out(group_size);
  if (group_size == 0) return out;
  std::size_t workers = std::max<std::size_t>(1, std::min(max_concurrency, group_size));
  if (!generators.front()->capabilities().supports_concurrent_sessions) workers = 1;

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  const auto work = [&] {
    for (std::size_t i = next++; i < group_size; i = next++) {
      try {
        out[i] = run_rollout(fact, *generators[i], registry, config);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::optional<std::string> check_origin_soundness(const Trajectory& t) {
  if (t.origin_mask.size() != t.tokens.size()) return "origin_mask and tokens differ in length";
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& s = t.segments[i];
    const bool env_kind = s.kind == SegmentKind::Information || s.kind == SegmentKind::Rethink;
    if (env_kind != (s.origin == Origin::Environment)) {
      return "segment " + std::to_string(i) + " (" + std::string(to_string(s.kind)) + ") has origin " +
             std::string(to_string(s.origin));
    }
    if (s.token_span.begin != cursor || s.token_span.end < s.token_span.begin || s.token_span.end > t.tokens.size()) {
      return "segment " + std::to_string(i) + " token span does not continue the previous one";
    }
    for (std::size_t k = s.token_span.begin; k < s.token_span.end; ++k) {
      if (t.origin_mask[k] != s.origin) return "token " + std::to_string(k) + " origin disagrees with its segment";
    }
    cursor = s.token_span.end;
  }
  if (cursor != t.tokens.size()) return "segments do not cover every token";

  // Environment text must be exactly what the engine injected: one block per
  // non-answer turn. A retrieval abort can leave the last turn without one.
  std::vector<Segment> expected;
  for (const auto& turn : t.turns) {
    if (turn.action == ActionKind::Answer) continue;
    if (turn.action == ActionKind::Search) {
      expected.push_back(
          parse_trajectory(turn.evidence.empty() ? render_empty_information() : render_information(turn.evidence))
              .front());
    } else {
      expected.push_back({SegmentKind::Rethink, std::string(kRethinkMessage), Origin::Environment, {}});
    }
  }
  std::vector<const Segment*> ours;
  for (const auto& s : t.segments) {
    if (s.origin == Origin::Environment) ours.push_back(&s);
  }
  if (ours.size() != expected.size() && ours.size() + 1 != expected.size()) {
    return "expected " + std::to_string(expected.size()) + " environment segments, found " +
           std::to_string(ours.size());
  }
  for (std::size_t i = 0; i < ours.size(); ++i) {
    if (ours[i]->kind != expected[i].kind || ours[i]->text != expected[i].text) {
      return "environment segment " + std::to_string(i) + " is not the text the engine injected";
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Trace IO

namespace {

json evidence_json(const Evidence& e) {
  return {{"rank", e.rank}, {"source", e.source_id}, {"doc", e.doc_id}, {"score", e.score}, {"text", e.text}};
}

Evidence evidence_from(const json& j) {
  return {j.at("source").get<std::string>(), j.at("doc").get<std::string>(), j.at("text").get<std::string>(),
          j.at("score").get<double>(), j.at("rank").get<int>()};
}

ActionKind action_from_string(const std::string& s) {
  if (s == "search") return ActionKind::Search;
  if (s == "answer") return ActionKind::Answer;
  if (s == "malformed") return ActionKind::Malformed;
  throw Error(ErrorCode::ParseError, "unknown action '" + s + "'");
}

FinishReason finish_from_string(const std::string& s) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  if (s == "eos") return FinishReason::EndOfSequence;
  throw Error(ErrorCode::ParseError, "unknown finish reason '" + s + "'");
}

}  // namespace

std::string trajectory_to_json_line(const Trajectory& t) {
  json segments = json::array();
  for (const auto& s : t.segments) {
    segments.push_back({{"kind", to_string(s.kind)},
                        {"text", s.text},
                        {"origin", to_string(s.origin)},
                        {"span", {s.token_span.begin, s.token_span.end}}});
  }
  std::string mask;
  mask.reserve(t.origin_mask.size());
  for (const auto o : t.origin_mask) mask.push_back(o == Origin::Generated ? 'G' : 'E');
  json turns = json::array();
  for (const auto& turn : t.turns) {
    json jt{{"action", to_string(turn.action)}, {"chunk", turn.chunk}, {"finish", to_string(turn.finish)}};
    if (turn.search) {
      jt["query"] = turn.search->query;
      jt["source_tag"] = turn.search->source_tag ? json(*turn.search->source_tag) : json(nullptr);
      jt["routed_source"] = turn.routed_source;
      jt["route_warning"] = turn.route_warning;
      json ev = json::array();
      for (const auto& e : turn.evidence) ev.push_back(evidence_json(e));
      jt["evidence"] = std::move(ev);
    }
    turns.push_back(std::move(jt));
  }
  json j{{"input_fact", t.input_fact},
         {"segments", std::move(segments)},
         {"tokens", t.tokens},
         {"origin_mask", mask},
         {"search_count", t.search_count},
         {"budget_used", t.budget_used},
         {"terminal", to_string(t.terminal)},
         {"turns", std::move(turns)}};
  if (!t.logprobs.empty()) j["logprobs"] = t.logprobs;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Trajectory trajectory_from_json_line(std::string_view line) {
  try {
    const auto j = json::parse(line);
    Trajectory t;
    t.input_fact = j.at("input_fact").get<std::string>();
    for (const auto& s : j.at("segments")) {
      const auto span = s.at("span");
      t.segments.push_back({segment_kind_from_string(s.at("kind").get<std::string>()), s.at("text").get<std::string>(),
                            origin_from_string(s.at("origin").get<std::string>()),
                            {span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()}});
    }
    t.tokens = j.at("tokens").get<std::vector<TokenId>>();
    for (const char c : j.at("origin_mask").get<std::string>()) {
      if (c != 'G' && c != 'E') throw Error(ErrorCode::ParseError, "origin_mask holds '" + std::string(1, c) + "'");
      t.origin_mask.push_back(c == 'G' ? Origin::Generated : Origin::Environment);
    }
    t.search_count = j.at("search_count").get<int>();
    t.budget_used = j.at("budget_used").get<int>();
    const auto terminal = j.at("terminal").get<std::string>();
    if (terminal != "answered" && terminal != "budget_exhausted") {
      throw Error(ErrorCode::ParseError, "unknown terminal '" + terminal + "'");
    }
    t.terminal = terminal == "answered" ? Terminal::Answered : Terminal::BudgetExhausted;
    for (const auto& jt : j.at("turns")) {
      TurnRecord turn;
      turn.action = action_from_string(jt.at("action").get<std::string>());
      turn.chunk = jt.at("chunk").get<std::string>();
      turn.finish = finish_from_string(jt.at("finish").get<std::string>());
      if (jt.contains("query")) {
        SearchAction a;
        a.query = jt.at("query").get<std::string>();
        if (!jt.at("source_tag").is_null()) a.source_tag = jt.at("source_tag").get<std::string>();
        turn.search = std::move(a);
        turn.routed_source = jt.at("routed_source").get<std::string>();
        turn.route_warning = jt.at("route_warning").get<bool>();
        for (const auto& e : jt.at("evidence")) turn.evidence.push_back(evidence_from(e));
      }
      t.turns.push_back(std::move(turn));
    }
    if (j.contains("logprobs")) t.logprobs = j.at("logprobs").get<std::vector<double>>();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("trace line: ") + e.what());
  }
}

void write_trace(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& t : trajectories) out << trajectory_to_json_line(t) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<Trajectory> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace msr2
