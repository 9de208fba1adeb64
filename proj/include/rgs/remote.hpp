#pragma once

#include <atomic>
#include <cstdint>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgs/dataset.hpp"
#include "rgs/policy.hpp"

namespace rgs {

struct HttpClientOptions {
  int max_retries = 2;       // extra attempts after the first one
  int backoff_initial_ms = 25;
  double backoff_factor = 2.0;
  int max_in_flight = 4;
  int timeout_ms = 10000;
};

/// Blocking JSON-over-HTTP POST with retry, exponential backoff and a cap on
/// concurrent in-flight requests. Every request carries a correlation id; a
/// response whose echoed id does not match is treated as a transport failure
/// and retried. Safe to call from multiple threads.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(std::string base_url, HttpClientOptions options = {});

  /// Throws RemoteUnavailableError once the retry cap is exhausted.
  nlohmann::json post_json(const std::string& path, nlohmann::json body);

  const std::string& base_url() const { return base_url_; }
  const HttpClientOptions& options() const { return options_; }

 private:
  std::string base_url_;
  HttpClientOptions options_;
  std::counting_semaphore<> slots_;
  std::atomic<std::uint64_t> next_correlation_;
};

/// A parsed ReAct-style completion. The span marks where the command text
/// sits inside the raw completion, for logprob attribution.
struct ParsedCompletion {
  ActionText action;
  std::size_t command_begin = 0;
  std::size_t command_end = 0;
};

/// Extracts "Thought: ..." (optional) and "Action: ..." (required) lines.
/// Throws MalformedActionError when no action line with a non-empty command
/// exists.
ParsedCompletion parse_react_completion(const std::string& text);

/// Sum of logprobs of the tokens overlapping [begin, end) in `text`. The
/// token strings must concatenate back to `text` exactly; otherwise throws
/// MalformedActionError.
double span_logprob(const std::string& text, std::size_t begin, std::size_t end,
                    const std::vector<std::string>& tokens,
                    const std::vector<double>& token_logprobs);

struct RemotePolicyOptions {
  std::string completions_path = "/v1/completions";
  // The agent prompt shows the full state including the latest observation.
  RenderOptions render{true, true, true};
  HttpClientOptions http;
};

/// Policy backed by a text-completion endpoint. One POST per sample_actions
/// call: {prompt, n, temperature, logprobs:true} in, a "completions" list of
/// {text, tokens, token_logprobs} out. Greedy decoding is requested as
/// temperature 0. The per-action logprob is the sum of the logprobs of the
/// tokens that overlap the command span.
class RemotePolicy : public Policy {
 public:
  explicit RemotePolicy(std::string base_url, RemotePolicyOptions options = {});

  std::vector<ActionSample> sample_actions(const TrajectoryState& state,
                                           const PolicyConfig& config, Rng& rng) const override;

  /// Remote endpoints cannot answer temperature-1 scoring queries, so implicit
  /// reward scoring is unavailable for remote policies.
  double logprob(const TrajectoryState& state, const ActionText& action) const override;

 private:
  RemotePolicyOptions options_;
  mutable HttpJsonClient client_;
};

}  // namespace rgs
