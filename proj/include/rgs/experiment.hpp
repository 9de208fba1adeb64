#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgs/dataset.hpp"
#include "rgs/env.hpp"
#include "rgs/infer.hpp"
#include "rgs/mcts.hpp"
#include "rgs/policy.hpp"
#include "rgs/scorer.hpp"

namespace rgs {

struct PolicySpec {
  std::string kind = "uniform";  // uniform | imitation | file | remote
  std::string path;              // tabular policy JSON for kind=file
  std::string endpoint;          // base url for kind=remote
  double smoothing = 1.0;        // imitation smoothing
};

struct ScorerSpec {
  std::string kind = "oracle";  // oracle | explicit | implicit | random | judge
  std::string model_path;       // explicit model JSON
  double beta = kDefaultImplicitBeta;
  std::string endpoint;  // judge base url
  std::uint64_t random_seed = 0;
};

struct AnnotateSettings {
  SearchConfig search;
  int min_visits = 3;  // the lambda filter
  RenderOptions render;
};

struct InferenceSettings {
  int n = 5;
  int beam_width = 5;
  int expansion_width = 5;
  double temperature = 1.0;
  int repeats = 16;  // evaluation episodes per task for sampled methods
};

/// One experiment, fully serializable. A run directory always receives the
/// resolved snapshot as config.json. Volatile facts (wall-clock) go to
/// meta.json so primary outputs stay byte-reproducible.
struct ExperimentConfig {
  std::string suite_path;
  PolicySpec policy;
  ScorerSpec scorer;
  AnnotateSettings annotate;
  InferenceSettings inference;
  std::uint64_t seed = 0;
  std::string output_dir;
  int jobs = 1;
  bool force = false;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ExperimentConfig load(const std::string& path);
};

/// Everything needed to run one task: the environment, the acting policy, a
/// uniform reference policy and (unless the scorer is the judge) a scorer.
struct TaskContext {
  std::unique_ptr<Environment> env;
  std::shared_ptr<const Policy> policy;
  std::shared_ptr<const Policy> reference;
  std::shared_ptr<const Scorer> scorer;
};

std::shared_ptr<const Policy> build_policy(const PolicySpec& spec, const Environment& env);
std::vector<TaskContext> build_contexts(const ExperimentConfig& config,
                                        const std::vector<TaskSpec>& suite);

// ---------------------------------------------------------------------------
// Commands. Each writes into config.output_dir; existing files are never
// overwritten unless config.force is set.

struct AnnotateResult {
  int tasks = 0;
  int failed = 0;
  std::size_t samples = 0;
  std::string dataset_path;
};

/// One search tree per task (trees/<task_id>.json) plus the lambda-filtered
/// ValueSample dataset (dataset.jsonl). Per-task failures are logged and
/// skipped; the caller fails the run when more than 10% of tasks failed.
AnnotateResult cmd_annotate(const ExperimentConfig& config);

struct TrainResult {
  TrainReport report;
  std::string model_path;
};

TrainResult cmd_train_scorer(const std::string& dataset_path, const std::string& model_out,
                             const TrainOptions& options, bool force,
                             const std::string& report_out = "");

struct TaskRow {
  std::string task_id;
  int weight = 1;
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_progress = 0.0;
};

struct EvaluationReport {
  std::string method;  // greedy | bon | beam
  std::string scorer;
  std::vector<TaskRow> rows;
  double suite_mean = 0.0;      // weighted by task weight
  double suite_progress = 0.0;  // same weighting
  int judge_fallbacks = 0;
  double wall_seconds = 0.0;  // serialized to meta.json only

  nlohmann::json to_json() const;  // deterministic; excludes wall_seconds
  std::string to_text() const;     // aligned columns
};

/// Runs `method` over every task and aggregates. Sampled methods run
/// inference.repeats episodes per task; greedy is deterministic and runs one.
/// Writes report.json and report.txt (and beam traces) into the run dir when
/// `write_outputs` is set.
EvaluationReport cmd_eval(const ExperimentConfig& config, const std::string& method,
                          bool write_outputs = true);

/// Rewrites every task's visible action surface forms under `rule`, recording
/// surface -> canonical aliases so environment semantics are untouched.
/// Rules: identity, synonym-swap, argument-reorder, whitespace-collapse.
std::vector<TaskSpec> perturb_suite(const std::vector<TaskSpec>& suite, const std::string& rule);

const std::vector<std::string>& perturbation_rules();

struct PerturbReport {
  std::string method;
  double original_mean = 0.0;
  std::vector<std::string> rules;
  std::vector<double> rule_means;  // parallel to rules
  double average = 0.0;            // mean over {original} + rule columns
  double stddev = 0.0;             // sample std over the same columns
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Evaluates `method` on the original suite and on each rule's perturbed
/// suite (written under <output_dir>/suites/). Mirrors a mean/spread
/// robustness table: a surface-insensitive scorer shows zero deltas.
PerturbReport cmd_perturb(const ExperimentConfig& config, const std::vector<std::string>& rules,
                          const std::string& method);

struct PrefAccReport {
  double threshold = 0.3;
  std::size_t states = 0;
  std::size_t pairs = 0;
  std::size_t correct = 0;
  bool defined = false;
  double accuracy = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Preference accuracy of the configured scorer over enumerated terminal
/// states: all same-task pairs whose ground-truth progress differs by more
/// than `threshold` count; a pair is correct when the scorer orders it like
/// the progress does. No qualifying pairs leaves the accuracy undefined.
PrefAccReport cmd_pref_acc(const ExperimentConfig& config, double threshold,
                           bool write_outputs = true);

}  // namespace rgs
