#include "rgs/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "rgs/errors.hpp"

namespace rgs {

using json = nlohmann::json;

std::string render_state(const TrajectoryState& state, const RenderOptions& options) {
  std::string text = "Task: " + state.instruction.text + "\n";
  text += "Observation: " + state.initial_observation.text + "\n";
  for (std::size_t i = 0; i < state.steps.size(); ++i) {
    const StepRecord& step = state.steps[i];
    if (options.include_thought && !step.action.thought.empty())
      text += "Thought: " + step.action.thought + "\n";
    text += "Action: " + step.action.command + "\n";
    bool last = i + 1 == state.steps.size();
    bool show = last ? options.include_last_observation : options.include_observations;
    if (show) text += "Observation: " + step.observation.text + "\n";
  }
  return text;
}

static void collect_samples(const SearchTree& tree, int idx, int min_visits,
                            const RenderOptions& options, std::vector<ValueSample>& out) {
  const SearchNode& n = tree.at(idx);
  if (idx != 0 && n.visit_count >= min_visits) {
    ValueSample s;
    s.rendered_state = render_state(n.state, options);
    s.value = n.value;
    s.visit_count = n.visit_count;
    s.task_id = tree.instruction.task_id;
    s.depth = n.state.depth();
    out.push_back(std::move(s));
  }
  for (int c : n.children) collect_samples(tree, c, min_visits, options, out);
}

std::vector<ValueSample> extract_value_samples(const SearchTree& tree, int min_visits,
                                               const RenderOptions& options) {
  std::vector<ValueSample> out;
  collect_samples(tree, 0, min_visits, options, out);
  return out;
}

std::vector<TrajectorySample> sample_implicit_dataset(
    const std::vector<const Environment*>& envs, const Policy& policy, const Policy& reference,
    int count_per_task, double temperature, std::uint64_t seed) {
  if (count_per_task < 1) throw ConfigError("count_per_task must be >= 1");
  RenderOptions full;
  full.include_last_observation = true;

  std::vector<TrajectorySample> out;
  for (const Environment* env : envs) {
    Rng rng(derive_seed(seed, env->task().task_id));
    for (int i = 0; i < count_per_task; ++i) {
      EpisodeResult ep =
          rollout(policy, *env, env->reset(), RolloutKind::sampled, temperature, rng);
      TrajectorySample ts;
      ts.task_id = env->task().task_id;
      ts.rendered_trajectory = render_state(ep.final_state, full);
      ts.outcome_reward = ep.outcome_reward;
      TrajectoryState prefix = ep.final_state;
      prefix.steps.clear();
      prefix.terminal = false;
      for (const StepRecord& step : ep.final_state.steps) {
        StepLogprobs sl;
        sl.command = step.action.command;
        sl.policy_logprob = policy.logprob(prefix, step.action);
        sl.reference_logprob = reference.logprob(prefix, step.action);
        ts.steps.push_back(std::move(sl));
        prefix.steps.push_back(step);
      }
      out.push_back(std::move(ts));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL

static constexpr const char* kValueSchema = "value_samples.v1";
static constexpr const char* kTrajectorySchema = "trajectory_samples.v1";

static std::vector<json> read_jsonl(const std::string& path, const char* schema) {
  std::ifstream in(path);
  if (!in) throw DatasetParseError("cannot open dataset: " + path, 0);
  std::string line;
  std::size_t line_no = 0;
  std::vector<json> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (line_no == 1) {
      if (j.value("schema", "") != schema)
        throw DatasetParseError("line 1: expected schema " + std::string(schema), 1);
      continue;
    }
    records.push_back(std::move(j));
  }
  if (line_no == 0) throw DatasetParseError("empty dataset file: " + path, 0);
  return records;
}

void write_value_samples(const std::string& path, const std::vector<ValueSample>& samples) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset: " + path);
  out << json{{"schema", kValueSchema}}.dump() << "\n";
  for (const auto& s : samples) {
    json j;
    j["rendered_state"] = s.rendered_state;
    j["value"] = s.value;
    j["visit_count"] = s.visit_count;
    j["task_id"] = s.task_id;
    j["depth"] = s.depth;
    out << j.dump() << "\n";
  }
}

std::vector<ValueSample> read_value_samples(const std::string& path) {
  std::vector<ValueSample> out;
  std::size_t line_no = 1;
  for (const json& j : read_jsonl(path, kValueSchema)) {
    ++line_no;
    try {
      ValueSample s;
      s.rendered_state = j.at("rendered_state").get<std::string>();
      s.value = j.at("value").get<double>();
      s.visit_count = j.at("visit_count").get<int>();
      s.task_id = j.at("task_id").get<std::string>();
      s.depth = j.at("depth").get<int>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DatasetParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

void write_trajectory_samples(const std::string& path,
                              const std::vector<TrajectorySample>& samples) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset: " + path);
  out << json{{"schema", kTrajectorySchema}}.dump() << "\n";
  for (const auto& s : samples) {
    json steps = json::array();
    for (const auto& st : s.steps)
      steps.push_back({{"command", st.command},
                       {"policy_logprob", st.policy_logprob},
                       {"reference_logprob", st.reference_logprob}});
    json j;
    j["task_id"] = s.task_id;
    j["rendered_trajectory"] = s.rendered_trajectory;
    j["outcome_reward"] = s.outcome_reward;
    j["steps"] = steps;
    out << j.dump() << "\n";
  }
}

std::vector<TrajectorySample> read_trajectory_samples(const std::string& path) {
  std::vector<TrajectorySample> out;
  std::size_t line_no = 1;
  for (const json& j : read_jsonl(path, kTrajectorySchema)) {
    ++line_no;
    try {
      TrajectorySample s;
      s.task_id = j.at("task_id").get<std::string>();
      s.rendered_trajectory = j.at("rendered_trajectory").get<std::string>();
      s.outcome_reward = j.at("outcome_reward").get<double>();
      for (const auto& st : j.at("steps")) {
        StepLogprobs sl;
        sl.command = st.at("command").get<std::string>();
        sl.policy_logprob = st.at("policy_logprob").get<double>();
        sl.reference_logprob = st.at("reference_logprob").get<double>();
        s.steps.push_back(std::move(sl));
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DatasetParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace rgs
