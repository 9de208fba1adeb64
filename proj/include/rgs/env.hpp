#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rgs/types.hpp"

namespace rgs {

struct GridItem {
  std::string name;
  int x = 0;
  int y = 0;
};

struct GridLayout {
  int width = 3;
  int height = 3;
  int start_x = 0;
  int start_y = 0;
  std::vector<GridItem> items;
};

struct Product {
  std::string id;
  std::string name;
  std::vector<std::string> attributes;
};

/// One task as loaded from a suite file. Exactly one of `layout` (grid world)
/// or `catalog` (shop world) must be present. `subgoals` is the ordered
/// subgoal table: grid predicates are "pickup:<item>" and "reach:<x>,<y>"
/// completed as a prefix; for the shop the entries are the target attributes
/// of the purchase, matched as a set. `actions`, when present, overrides the
/// default action vocabulary (surface forms). `aliases` maps surface command
/// -> canonical command and is how perturbation rules rewrite commands without
/// touching semantics.
struct TaskSpec {
  std::string task_id;
  std::string text;
  int max_steps = 1;
  std::vector<std::string> subgoals;
  std::optional<GridLayout> layout;
  std::vector<Product> catalog;
  std::vector<std::string> actions;
  std::map<std::string, std::string> aliases;
  // Evaluation weight standing in for a benchmark's test-set size; suite
  // means weight per-task rows by it.
  int weight = 1;
};

std::vector<TaskSpec> load_task_suite(const std::string& path);
void save_task_suite(const std::string& path, const std::vector<TaskSpec>& suite);
const TaskSpec& find_task(const std::vector<TaskSpec>& suite, const std::string& task_id);

/// Deterministic single-task environment. All transition functions are pure:
/// they take a TrajectoryState by const reference and return a fresh state, so
/// concurrent readers never race.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvironmentSpec& spec() const { return spec_; }
  const TaskSpec& task() const { return task_; }
  Instruction instruction() const { return {task_.task_id, task_.text}; }

  /// Depth-0 non-terminal state with the initial observation.
  TrajectoryState reset() const;

  /// Applies one command. Unknown commands produce the no-op observation
  /// "Nothing happens." and still consume a step. The returned state is
  /// terminal when the task finishes or the step budget is exhausted.
  TrajectoryState step(const TrajectoryState& state, const ActionText& action) const;

  /// Outcome reward in [0,1]; only defined on terminal states.
  double outcome_reward(const TrajectoryState& state) const;

  /// Ground-truth progress in [0,1], defined for every state.
  std::optional<double> progress_rate(const TrajectoryState& state) const;

 protected:
  explicit Environment(TaskSpec task) : task_(std::move(task)) {}

  /// World summary accumulated by replaying a state's commands.
  struct Fold {
    double progress = 0.0;
    bool finished = false;
  };

  struct StepResult {
    std::string observation;
    bool finished = false;
  };

  virtual std::string initial_observation() const = 0;
  /// Applies one canonical command on top of the world reached by `state`.
  virtual StepResult apply(const TrajectoryState& state, const std::string& canonical) const = 0;
  virtual Fold fold(const TrajectoryState& state) const = 0;

  std::string resolve_command(const std::string& command) const;
  bool in_vocabulary(const std::string& command) const;

  TaskSpec task_;
  EnvironmentSpec spec_;
};

/// Dispatches on layout/catalog presence. Validates the task.
std::unique_ptr<Environment> make_environment(const TaskSpec& task);

/// Every terminal trajectory reachable from reset() using only commands in
/// `support` (defaults to the full action vocabulary when empty). Fails with
/// EnumerationTooLargeError when |support|^max_steps exceeds `budget`.
std::vector<EpisodeResult> enumerate_all_episodes(const Environment& env,
                                                  const std::vector<std::string>& support = {},
                                                  std::uint64_t budget = 1u << 20);

/// Same enumeration but rooted at an arbitrary state.
std::vector<EpisodeResult> enumerate_from(const Environment& env, const TrajectoryState& state,
                                          const std::vector<std::string>& support = {},
                                          std::uint64_t budget = 1u << 20);

/// Best enumerated episode: max reward, then fewest steps, then
/// lexicographically smallest command sequence. Deterministic.
EpisodeResult expert_episode(const Environment& env, std::uint64_t budget = 1u << 20);

}  // namespace rgs
