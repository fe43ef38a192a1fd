#include "msr2/app_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"

namespace msr2 {

using nlohmann::json;

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why);
}

void only_keys(const json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
  if (!obj.is_object()) bad_key(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) bad_key(prefix.empty() ? k : prefix + "." + k, "unknown key");
  }
}

template <typename T>
void read(const json& obj, const std::string& prefix, const char* key, T& into) {
  if (!obj.contains(key)) return;
  const auto full = prefix.empty() ? std::string(key) : prefix + "." + key;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_key(full, "wrong type");
  }
}

std::optional<std::uint64_t> env_u64(const char* var) {
  const char* v = std::getenv(var);
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const auto x = std::strtoull(v, &end, 10);
  if (*end != '\0') throw Error(ErrorCode::InvalidConfig, std::string(var) + " is not an unsigned integer");
  return x;
}

}  // namespace

void AppConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  only_keys(j, "", {"registry", "aliases", "interval_table", "rubric", "allow_modified_rubric", "seed", "jobs",
                    "rollout", "grpo", "toy", "endpoints"});
  std::string s;
  if (j.contains("registry")) {
    read(j, "", "registry", s);
    registry_dir = s;
  }
  read(j, "", "aliases", aliases);
  if (j.contains("interval_table")) {
    read(j, "", "interval_table", s);
    interval_table = s;
  }
  if (j.contains("rubric")) {
    read(j, "", "rubric", s);
    rubric = s;
  }
  read(j, "", "allow_modified_rubric", allow_modified_rubric);
  read(j, "", "seed", seed);
  read(j, "", "jobs", jobs);
  if (j.contains("rollout")) {
    const auto& r = j["rollout"];
    only_keys(r, "rollout", {"budget", "top_k", "max_prompt_tokens", "max_response_tokens"});
    read(r, "rollout", "budget", rollout.budget_B);
    read(r, "rollout", "top_k", rollout.top_k);
    read(r, "rollout", "max_prompt_tokens", rollout.max_prompt_tokens);
    read(r, "rollout", "max_response_tokens", rollout.max_response_tokens);
  }
  if (j.contains("grpo")) {
    const auto& g = j["grpo"];
    only_keys(g, "grpo", {"group_size", "eps_std", "eps_clip", "beta_kl", "learning_rate", "lambda_r"});
    read(g, "grpo", "group_size", grpo.group_size_G);
    read(g, "grpo", "eps_std", grpo.eps_std);
    read(g, "grpo", "eps_clip", grpo.eps_clip);
    read(g, "grpo", "beta_kl", grpo.beta_kl);
    read(g, "grpo", "learning_rate", grpo.learning_rate);
    read(g, "grpo", "lambda_r", lambda_r);
  }
  if (j.contains("toy")) {
    const auto& t = j["toy"];
    only_keys(t, "toy", {"learning_rate", "facts_per_step"});
    read(t, "toy", "learning_rate", toy_learning_rate);
    read(t, "toy", "facts_per_step", toy_facts_per_step);
  }
  if (j.contains("endpoints")) {
    const auto& e = j["endpoints"];
    only_keys(e, "endpoints", {"generator", "judge", "embedder", "timeout_ms"});
    long long timeout_ms = 30000;
    read(e, "endpoints", "timeout_ms", timeout_ms);
    const auto endpoint = [&](const char* key, std::optional<Endpoint>& into) {
      if (!e.contains(key)) return;
      std::string url;
      read(e, "endpoints", key, url);
      into = Endpoint{url, std::chrono::milliseconds(timeout_ms), {}};
    };
    endpoint("generator", generator);
    endpoint("judge", judge);
    endpoint("embedder", embedder);
  }
}

void AppConfig::merge_env() {
  if (const char* r = std::getenv("MSR2_REGISTRY"); r && *r) registry_dir = r;
  if (const auto s = env_u64("MSR2_SEED")) seed = *s;
  if (const auto n = env_u64("MSR2_JOBS")) jobs = static_cast<std::size_t>(*n);
  const auto env = ClientEnvironment::from_env();
  if (env.generator) generator = env.generator;
  if (env.judge) judge = env.judge;
  if (env.embedder) embedder = env.embedder;
}

void AppConfig::validate() const {
  if (registry_dir.empty()) bad_key("registry", "must be non-empty");
  if (jobs == 0) bad_key("jobs", "must be at least 1");
  if (!(lambda_r >= 0 && lambda_r <= 1)) bad_key("grpo.lambda_r", "must lie in [0, 1]");
  if (!(toy_learning_rate > 0)) bad_key("toy.learning_rate", "must be positive");
  if (toy_facts_per_step <= 0) bad_key("toy.facts_per_step", "must be positive");
  try {
    rollout.validate();
  } catch (const Error& e) {
    bad_key("rollout", e.detail());
  }
  try {
    grpo.validate();
  } catch (const Error& e) {
    bad_key("grpo", e.detail());
  }
  for (const auto* ep : {&generator, &judge, &embedder}) {
    if (*ep && (*ep)->url.find("://") == std::string::npos) bad_key("endpoints", "URL '" + (*ep)->url + "' lacks a scheme");
  }
}

}  // namespace msr2
