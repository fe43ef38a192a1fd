// Eigen must come before httplib: <resolv.h> defines a _res macro.
#include "msr2/clients.hpp"

#include <thread>
#include <variant>

#include "httplib.h"
#include "json.hpp"

namespace msr2 {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.base = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

struct TransportFailure {
  int attempts = 0;
  std::string last_error;

  std::string describe() const {
    return "after " + std::to_string(attempts) + " attempt(s): " + last_error;
  }
};

// POSTs a JSON body, retrying transport errors and 5xx replies. Returns the
// parsed reply or the failure record when the retry budget is spent. A 4xx
// reply or unparsable body is a ProtocolError straight away.
std::variant<json, TransportFailure> post_json(const Endpoint& endpoint, const std::string& route,
                                               const json& body, const RetryPolicy& retry) {
  const auto url = split_url(endpoint.url);
  TransportFailure failure;
  const int attempts = std::max(1, retry.attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    failure.attempts = attempt;
    httplib::Client client(url.base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    if (!endpoint.bearer_token.empty()) client.set_bearer_token_auth(endpoint.bearer_token);
    auto res = client.Post(url.path + route, body.dump(), "application/json");
    if (!res) {
      failure.last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 500) {
      failure.last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw Error(ErrorCode::ProtocolError, url.path + route + " replied HTTP " + std::to_string(res->status));
    } else {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ProtocolError, "unparsable reply from " + route + ": " + e.what());
      }
    }
    if (attempt < attempts) {
      const auto delay = retry.backoff_for(attempt);
      if (retry.sleep) {
        retry.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
  return failure;
}

template <typename T>
T field(const json& j, const char* name, const char* route) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ProtocolError, std::string(route) + " reply lacks a valid '" + name + "' field");
  }
}

}  // namespace

RemoteGenerator::RemoteGenerator(Endpoint endpoint, GeneratorCapabilities caps, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), caps_(caps), retry_(std::move(retry)) {}

GenerationResult RemoteGenerator::generate(const GenerationRequest& request) {
  json body{{"context", request.context},
            {"context_tokens", request.context_tokens},
            {"stop", request.stop_tags},
            {"max_new_tokens", request.max_new_tokens}};
  auto reply = post_json(endpoint_, "/generate", body, retry_);
  if (auto* failure = std::get_if<TransportFailure>(&reply)) {
    throw Error(ErrorCode::GeneratorUnavailable, endpoint_.url + " " + failure->describe());
  }
  const auto& j = std::get<json>(reply);
  auto text = field<std::string>(j, "text", "/generate");
  std::optional<std::vector<TokenId>> tokens;
  std::optional<std::vector<double>> logprobs;
  if (j.contains("tokens") && !j["tokens"].is_null()) tokens = field<std::vector<TokenId>>(j, "tokens", "/generate");
  if (j.contains("logprobs") && !j["logprobs"].is_null()) {
    logprobs = field<std::vector<double>>(j, "logprobs", "/generate");
    if (!tokens || tokens->size() != logprobs->size()) {
      throw Error(ErrorCode::ProtocolError, "/generate logprobs are not aligned with tokens");
    }
  }
  const auto finish = j.value("finish_reason", std::string("eos"));
  if (finish != "stop" && finish != "length" && finish != "eos") {
    throw Error(ErrorCode::ProtocolError, "/generate finish_reason '" + finish + "' is not stop|length|eos");
  }
  if (tokens) {
    // Server-side ids cannot be re-cut locally; trust its own stop handling.
    GenerationResult out;
    out.text = std::move(text);
    out.tokens = std::move(tokens);
    out.logprobs = std::move(logprobs);
    out.finish = finish == "stop" ? FinishReason::Stop
                                  : (finish == "length" ? FinishReason::Length : FinishReason::EndOfSequence);
    return out;
  }
  return finalize_generation(std::move(text), std::nullopt, std::nullopt, finish != "length", request);
}

RemoteJudge::RemoteJudge(Endpoint endpoint, RetryPolicy retry, std::size_t max_in_flight)
    : endpoint_(std::move(endpoint)), retry_(std::move(retry)), limiter_(max_in_flight) {}

std::string RemoteJudge::judge(const std::string& prompt) {
  limiter_.acquire();
  struct Release {
    InFlightLimiter& l;
    ~Release() { l.release(); }
  } release{limiter_};
  auto reply = post_json(endpoint_, "/judge", json{{"prompt", prompt}}, retry_);
  if (auto* failure = std::get_if<TransportFailure>(&reply)) {
    throw Error(ErrorCode::JudgeUnavailable, endpoint_.url + " " + failure->describe());
  }
  return field<std::string>(std::get<json>(reply), "reply", "/judge");
}

RemoteEmbedder::RemoteEmbedder(Endpoint endpoint, std::size_t dim, std::size_t batch_limit, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), dim_(dim), batch_limit_(batch_limit == 0 ? 1 : batch_limit),
      retry_(std::move(retry)) {}

Eigen::VectorXd RemoteEmbedder::embed(std::string_view text) const {
  const std::string one(text);
  return embed_chunk(std::span<const std::string>(&one, 1)).front();
}

std::vector<Eigen::VectorXd> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += batch_limit_) {
    const auto chunk = embed_chunk(texts.subspan(i, std::min(batch_limit_, texts.size() - i)));
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

std::vector<Eigen::VectorXd> RemoteEmbedder::embed_chunk(std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  json body{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto reply = post_json(endpoint_, "/embed", body, retry_);
  if (auto* failure = std::get_if<TransportFailure>(&reply)) {
    throw Error(ErrorCode::EmbedderUnavailable, endpoint_.url + " " + failure->describe());
  }
  const auto rows = field<std::vector<std::vector<double>>>(std::get<json>(reply), "vectors", "/embed");
  if (rows.size() != texts.size()) {
    throw Error(ErrorCode::ProtocolError, "/embed returned " + std::to_string(rows.size()) + " vectors for " +
                                              std::to_string(texts.size()) + " texts");
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.size() != dim_) {
      throw Error(ErrorCode::DimMismatch, "/embed vector has dimension " + std::to_string(row.size()) +
                                              ", manifest expects " + std::to_string(dim_));
    }
    out.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
  }
  return out;
}

}  // namespace msr2
