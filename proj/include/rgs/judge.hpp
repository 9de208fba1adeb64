#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgs/remote.hpp"

namespace rgs {

struct JudgeOptions {
  std::string path = "/v1/judge";
  HttpClientOptions http;
};

/// Trajectory selector driven by a forced function call on a remote endpoint.
/// Deliberately not a Scorer: it ranks a candidate set and never produces a
/// standalone scalar for one state.
class JudgeClient {
 public:
  explicit JudgeClient(std::string base_url, JudgeOptions options = {});

  /// Picks one of `candidates` (1-based index). 1 to 5 candidates; with a
  /// single candidate any valid endpoint answer maps to 1. Throws
  /// JudgeProtocolError when the endpoint's answer violates the function-call
  /// protocol or names a slot beyond the candidate count, and
  /// RemoteUnavailableError on transport failure.
  int select(const std::string& task_description, const std::string& task_goal,
             const std::vector<std::string>& candidates);

  /// The selection prompt. Candidate slots beyond `candidates.size()` are
  /// omitted. The slot headers carry the template's exact historical
  /// spellings, misspelled slots 3 to 5 included; tests pin the bytes.
  static std::string build_prompt(const std::string& task_description,
                                  const std::string& task_goal,
                                  const std::vector<std::string>& candidates);

  /// The "choose_preferred_answer" function schema the endpoint must call.
  static const nlohmann::json& tools_schema();

  /// Validates a raw endpoint response and returns the announced preference
  /// in 1..5. Throws JudgeProtocolError on any protocol violation.
  static int parse_preference(const nlohmann::json& response);

 private:
  JudgeOptions options_;
  HttpJsonClient client_;
};

}  // namespace rgs
