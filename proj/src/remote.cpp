#include "rgs/remote.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "rgs/errors.hpp"

namespace rgs {

using json = nlohmann::json;

HttpJsonClient::HttpJsonClient(std::string base_url, HttpClientOptions options)
    : base_url_(std::move(base_url)),
      options_(options),
      slots_(options.max_in_flight > 0 ? options.max_in_flight : 1),
      next_correlation_(0) {}

namespace {

struct SlotGuard {
  std::counting_semaphore<>& sem;
  explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
};

}  // namespace

json HttpJsonClient::post_json(const std::string& path, json body) {
  SlotGuard guard(slots_);
  std::string correlation = "c" + std::to_string(next_correlation_.fetch_add(1));
  body["correlation_id"] = correlation;
  std::string payload = body.dump();

  std::string last_failure = "no attempt made";
  int attempts = options_.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      double ms = static_cast<double>(options_.backoff_initial_ms) *
                  std::pow(options_.backoff_factor, attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(ms)));
    }
    // A fresh connection per attempt; keep-alive buys nothing at this scale
    // and a shared socket would not be safe across threads.
    httplib::Client cli(base_url_);
    cli.set_connection_timeout(0, options_.timeout_ms * 1000L);
    cli.set_read_timeout(options_.timeout_ms / 1000, (options_.timeout_ms % 1000) * 1000L);
    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_failure = "http status " + std::to_string(res->status);
      continue;
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      last_failure = std::string("unparseable response body: ") + e.what();
      continue;
    }
    if (parsed.value("correlation_id", "") != correlation) {
      last_failure = "correlation id mismatch";
      continue;
    }
    return parsed;
  }
  throw RemoteUnavailableError("POST " + base_url_ + path + " failed after " +
                               std::to_string(attempts) + " attempts; last: " + last_failure);
}

// ---------------------------------------------------------------------------
// Completion parsing

static std::string_view trim_view(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

ParsedCompletion parse_react_completion(const std::string& text) {
  ParsedCompletion out;
  bool have_action = false;
  bool have_thought = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::size_t end = (eol == std::string::npos) ? text.size() : eol;
    std::string_view line(text.data() + pos, end - pos);
    std::string_view stripped = trim_view(line);
    if (!have_thought && !have_action && stripped.rfind("Thought:", 0) == 0) {
      out.action.thought = std::string(trim_view(stripped.substr(8)));
      have_thought = true;
    } else if (stripped.rfind("Action:", 0) == 0) {
      std::string_view rest = stripped.substr(7);
      std::string_view command = trim_view(rest);
      if (!command.empty()) {
        out.action.command = std::string(command);
        out.command_begin = static_cast<std::size_t>(command.data() - text.data());
        out.command_end = out.command_begin + command.size();
        have_action = true;
        break;
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  if (!have_action)
    throw MalformedActionError("completion has no \"Action:\" line with a command", text);
  return out;
}

double span_logprob(const std::string& text, std::size_t begin, std::size_t end,
                    const std::vector<std::string>& tokens,
                    const std::vector<double>& token_logprobs) {
  if (tokens.size() != token_logprobs.size())
    throw MalformedActionError("token/logprob arity mismatch", text);
  std::size_t offset = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (text.compare(offset, tok.size(), tok) != 0)
      throw MalformedActionError("token stream does not reconstruct the completion", text);
    std::size_t tok_end = offset + tok.size();
    if (offset < end && tok_end > begin) total += token_logprobs[i];
    offset = tok_end;
  }
  if (offset != text.size())
    throw MalformedActionError("token stream does not reconstruct the completion", text);
  return total;
}

// ---------------------------------------------------------------------------
// RemotePolicy

RemotePolicy::RemotePolicy(std::string base_url, RemotePolicyOptions options)
    : options_(std::move(options)), client_(std::move(base_url), options_.http) {}

std::vector<ActionSample> RemotePolicy::sample_actions(const TrajectoryState& state,
                                                       const PolicyConfig& config,
                                                       Rng& rng) const {
  (void)rng;  // randomness lives on the endpoint's side
  if (state.terminal) throw IllegalQueryError("sample_actions on a terminal state");
  if (config.sample_width_k < 1) throw ConfigError("sample_width_k must be >= 1");
  json body = {{"prompt", render_state(state, options_.render)},
               {"n", config.sample_width_k},
               {"temperature", config.greedy ? 0.0 : config.temperature},
               {"logprobs", true}};
  json resp = client_.post_json(options_.completions_path, std::move(body));
  if (!resp.contains("completions") || !resp["completions"].is_array())
    throw MalformedActionError("response has no completions list", resp.dump());
  const json& completions = resp["completions"];
  if (completions.size() != static_cast<std::size_t>(config.sample_width_k))
    throw MalformedActionError("expected " + std::to_string(config.sample_width_k) +
                                   " completions, got " + std::to_string(completions.size()),
                               resp.dump());
  std::vector<ActionSample> out;
  out.reserve(completions.size());
  for (const json& c : completions) {
    std::string text = c.value("text", "");
    ParsedCompletion parsed = parse_react_completion(text);
    std::vector<std::string> tokens = c.value("tokens", std::vector<std::string>{});
    std::vector<double> lps = c.value("token_logprobs", std::vector<double>{});
    double lp = span_logprob(text, parsed.command_begin, parsed.command_end, tokens, lps);
    out.push_back({parsed.action, lp});
  }
  return out;
}

double RemotePolicy::logprob(const TrajectoryState& state, const ActionText& action) const {
  (void)state;
  (void)action;
  throw IllegalQueryError(
      "remote policies cannot answer temperature-1 logprob queries; "
      "implicit scoring needs a local policy");
}

}  // namespace rgs
