#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rgs {

/// Scripted behavior for the bundled mock endpoint. Completions are a pure
/// function of the prompt hash, so every interaction is reproducible.
struct MockEndpointConfig {
  std::vector<std::string> commands = {"move east"};
  std::string thought = "proceed";
  double token_logprob = -0.25;  // flat logprob for every token

  int judge_preference = 1;
  // fixed | invalid_enum | missing_call | wrong_name | non_integer | garbage_arguments
  std::string judge_mode = "fixed";

  int fail_first = 0;            // answer HTTP 500 to this many requests first
  bool echo_correlation = true;  // disable to exercise the client's id check
};

/// Local HTTP server implementing the completion and judge wire protocols for
/// tests and offline experiments. Binds an ephemeral port on 127.0.0.1.
class MockEndpoint {
 public:
  explicit MockEndpoint(MockEndpointConfig config);
  ~MockEndpoint();
  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  /// Starts serving; returns the bound port. Throws ConfigError when the
  /// socket cannot be bound.
  int start();
  void stop();

  std::string base_url() const;
  int port() const;

  int request_count() const;
  nlohmann::json last_completion_request() const;
  nlohmann::json last_judge_request() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Exact-reconstruction tokenization used by the mock: alternating maximal
/// runs of whitespace and non-whitespace, concatenating back to the input.
std::vector<std::string> mock_tokenize(const std::string& text);

}  // namespace rgs
