#pragma once

#include <stdexcept>
#include <string>

namespace rgs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad task files, bad configs, bad hyperparameters.
struct ConfigError : Error {
  using Error::Error;
};

struct TaskNotFoundError : Error {
  using Error::Error;
};

/// Stepping a terminal state, or stepping past the step budget.
struct IllegalTransitionError : Error {
  using Error::Error;
};

/// Outcome reward requested on a non-terminal state.
struct NotTerminalError : Error {
  using Error::Error;
};

struct EnumerationTooLargeError : Error {
  using Error::Error;
};

/// Query a policy cannot answer (sampling a terminal state, logprob on a
/// remote policy, ...).
struct IllegalQueryError : Error {
  using Error::Error;
};

/// Remote endpoint unreachable or still failing after the retry cap.
struct RemoteUnavailableError : Error {
  using Error::Error;
};

/// Remote completion from which no action could be parsed. Carries raw text.
struct MalformedActionError : Error {
  explicit MalformedActionError(const std::string& what, std::string raw_text)
      : Error(what), raw(std::move(raw_text)) {}
  std::string raw;
};

/// Judge response that violates the function-call protocol.
struct JudgeProtocolError : Error {
  using Error::Error;
};

/// JSONL record that does not parse or does not match its schema. Carries the
/// 1-based line number.
struct DatasetParseError : Error {
  DatasetParseError(const std::string& what, std::size_t line_number)
      : Error(what), line(line_number) {}
  std::size_t line = 0;
};

}  // namespace rgs
