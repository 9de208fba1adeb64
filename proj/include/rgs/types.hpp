#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rgs {

/// One task instance handed to an agent.
struct Instruction {
  std::string task_id;
  std::string text;
};

struct Observation {
  std::string text;
};

/// A single agent action. Identity is the command string: two actions are the
/// same action iff their commands are byte-equal; the thought is free text and
/// never participates in comparisons or environment semantics.
struct ActionText {
  std::string thought;
  std::string command;
};

struct StepRecord {
  ActionText action;
  Observation observation;
};

/// Full interaction prefix. States are immutable values: stepping an
/// environment returns a new state, it never mutates the input.
struct TrajectoryState {
  Instruction instruction;
  Observation initial_observation;
  std::vector<StepRecord> steps;
  bool terminal = false;

  int depth() const { return static_cast<int>(steps.size()); }
};

/// A finished episode plus its scalar outcome in [0,1].
struct EpisodeResult {
  TrajectoryState final_state;
  double outcome_reward = 0.0;
  std::optional<double> progress_rate;
};

struct EnvironmentSpec {
  std::string name;
  int max_steps = 1;
  std::vector<std::string> action_vocabulary;
  bool deterministic = true;
};

}  // namespace rgs
