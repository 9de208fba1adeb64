#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgs/mcts.hpp"
#include "rgs/policy.hpp"
#include "rgs/types.hpp"

namespace rgs {

/// Controls for the deterministic textual rendering of a state.
/// `include_observations` governs every observation except the final step's,
/// which is governed solely by `include_last_observation`; the two are
/// independent. Defaults match how states are scored: thoughts and
/// intermediate observations shown, the last observation hidden.
struct RenderOptions {
  bool include_thought = true;
  bool include_observations = true;
  bool include_last_observation = false;
};

/// Instruction, initial observation, then one block per step. Distinct
/// (instruction, command sequence) pairs always render to distinct strings.
std::string render_state(const TrajectoryState& state, const RenderOptions& options = {});

/// A tree node exported for value-model training.
struct ValueSample {
  std::string rendered_state;
  double value = 0.0;
  int visit_count = 0;
  std::string task_id;
  int depth = 0;
};

/// Depth-first export of every non-root node with visit_count >= min_visits
/// (the lambda filter). Deterministic preorder.
std::vector<ValueSample> extract_value_samples(const SearchTree& tree, int min_visits,
                                               const RenderOptions& options = {});

struct StepLogprobs {
  std::string command;
  double policy_logprob = 0.0;
  double reference_logprob = 0.0;
};

/// One sampled trajectory for implicit reward modeling.
struct TrajectorySample {
  std::string task_id;
  std::string rendered_trajectory;
  double outcome_reward = 0.0;
  std::vector<StepLogprobs> steps;
};

/// `count_per_task` sampled episodes per environment at `temperature`, with
/// per-step temperature-1 logprobs under the policy and the reference.
std::vector<TrajectorySample> sample_implicit_dataset(
    const std::vector<const Environment*>& envs, const Policy& policy, const Policy& reference,
    int count_per_task, double temperature, std::uint64_t seed);

// JSONL io. The first line is a schema header; every following line is one
// record. Readers reject wrong schemas and report 1-based line numbers.
void write_value_samples(const std::string& path, const std::vector<ValueSample>& samples);
std::vector<ValueSample> read_value_samples(const std::string& path);
void write_trajectory_samples(const std::string& path,
                              const std::vector<TrajectorySample>& samples);
std::vector<TrajectorySample> read_trajectory_samples(const std::string& path);

}  // namespace rgs
