#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rgs/errors.hpp"
#include "rgs/experiment.hpp"

using namespace rgs;

namespace {

// Every subcommand shares the experiment-config surface; flags override the
// config file only when actually passed on the command line.
struct Flags {
  std::string config_path;
  std::string suite;
  std::string output_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool force = false;

  std::string policy_kind = "uniform";
  std::string policy_file;
  std::string policy_endpoint;
  double smoothing = 1.0;

  std::string scorer_kind = "oracle";
  std::string model;
  std::string scorer_endpoint;
  double beta = kDefaultImplicitBeta;
  std::uint64_t random_seed = 0;

  int iterations = 40;
  double exploration_c = 0.5;
  int expansion_width = 5;
  int simulations = 1;
  std::string rollout_mode = "greedy";
  double search_temperature = 1.0;
  int min_visits = 3;

  int n = 5;
  int beam_width = 5;
  int beam_expansion = 5;
  double temperature = 1.0;
  int repeats = 16;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "experiment config JSON");
  cmd->add_option("--suite", f.suite, "task suite JSON");
  cmd->add_option("--output-dir", f.output_dir, "run directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--jobs", f.jobs, "parallel tasks");
  cmd->add_flag("--force", f.force, "allow overwriting existing outputs");
  cmd->add_option("--policy-kind", f.policy_kind, "uniform|imitation|file|remote");
  cmd->add_option("--policy-file", f.policy_file, "tabular policy JSON for --policy-kind file");
  cmd->add_option("--policy-endpoint", f.policy_endpoint, "completion endpoint for remote policy");
  cmd->add_option("--smoothing", f.smoothing, "imitation smoothing");
}

void add_scorer_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--scorer-kind", f.scorer_kind, "oracle|explicit|implicit|random|judge");
  cmd->add_option("--model", f.model, "explicit scorer model JSON");
  cmd->add_option("--scorer-endpoint", f.scorer_endpoint, "judge endpoint");
  cmd->add_option("--beta", f.beta, "implicit scorer beta");
  cmd->add_option("--random-seed", f.random_seed, "random scorer seed");
}

void add_inference_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--n", f.n, "best-of-n candidate count");
  cmd->add_option("--beam-width", f.beam_width, "beam slots kept per layer");
  cmd->add_option("--beam-expansion", f.beam_expansion, "sampled actions per kept state");
  cmd->add_option("--temperature", f.temperature, "sampling temperature");
  cmd->add_option("--repeats", f.repeats, "evaluation episodes per task");
}

void add_annotate_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--iterations", f.iterations, "search iterations per task");
  cmd->add_option("--exploration-c", f.exploration_c, "UCB exploration constant");
  cmd->add_option("--expansion-width", f.expansion_width, "policy samples per expansion");
  cmd->add_option("--simulations", f.simulations, "rollouts per fresh child");
  cmd->add_option("--rollout-mode", f.rollout_mode, "greedy|sampled")
      ->check(CLI::IsMember({"greedy", "sampled"}));
  cmd->add_option("--search-temperature", f.search_temperature, "expansion sampling temperature");
  cmd->add_option("--min-visits", f.min_visits, "visit threshold for dataset extraction");
}

ExperimentConfig resolve_config(const CLI::App* cmd, const Flags& f) {
  ExperimentConfig c;
  if (!f.config_path.empty()) c = ExperimentConfig::load(f.config_path);
  auto passed = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (passed("--suite")) c.suite_path = f.suite;
  if (passed("--output-dir")) c.output_dir = f.output_dir;
  if (passed("--seed")) c.seed = f.seed;
  if (passed("--jobs")) c.jobs = f.jobs;
  if (passed("--force")) c.force = f.force;
  if (passed("--policy-kind")) c.policy.kind = f.policy_kind;
  if (passed("--policy-file")) c.policy.path = f.policy_file;
  if (passed("--policy-endpoint")) c.policy.endpoint = f.policy_endpoint;
  if (passed("--smoothing")) c.policy.smoothing = f.smoothing;
  if (cmd->get_option_no_throw("--scorer-kind") != nullptr) {
    if (passed("--scorer-kind")) c.scorer.kind = f.scorer_kind;
    if (passed("--model")) c.scorer.model_path = f.model;
    if (passed("--scorer-endpoint")) c.scorer.endpoint = f.scorer_endpoint;
    if (passed("--beta")) c.scorer.beta = f.beta;
    if (passed("--random-seed")) c.scorer.random_seed = f.random_seed;
  }
  if (cmd->get_option_no_throw("--iterations") != nullptr) {
    if (passed("--iterations")) c.annotate.search.iterations = f.iterations;
    if (passed("--exploration-c")) c.annotate.search.exploration_c = f.exploration_c;
    if (passed("--expansion-width")) c.annotate.search.expansion_width = f.expansion_width;
    if (passed("--simulations")) c.annotate.search.simulations = f.simulations;
    if (passed("--rollout-mode"))
      c.annotate.search.rollout_mode =
          f.rollout_mode == "sampled" ? RolloutKind::sampled : RolloutKind::greedy;
    if (passed("--search-temperature")) c.annotate.search.temperature = f.search_temperature;
    if (passed("--min-visits")) c.annotate.min_visits = f.min_visits;
  }
  if (cmd->get_option_no_throw("--n") != nullptr) {
    if (passed("--n")) c.inference.n = f.n;
    if (passed("--beam-width")) c.inference.beam_width = f.beam_width;
    if (passed("--beam-expansion")) c.inference.expansion_width = f.beam_expansion;
    if (passed("--temperature")) c.inference.temperature = f.temperature;
    if (passed("--repeats")) c.inference.repeats = f.repeats;
  }
  if (c.suite_path.empty()) throw ConfigError("no task suite given (--suite or config file)");
  return c;
}

int run_eval(const CLI::App* cmd, const Flags& f, const std::string& method) {
  ExperimentConfig config = resolve_config(cmd, f);
  EvaluationReport report = cmd_eval(config, method);
  std::fputs(report.to_text().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"process-reward annotation and reward-guided search over toy text tasks"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* annotate = app.add_subcommand("annotate", "build search trees and a value dataset");
  add_run_flags(annotate, f);
  add_annotate_flags(annotate, f);

  CLI::App* train = app.add_subcommand("train-scorer", "fit the explicit scorer on a dataset");
  std::string dataset_path, model_out, report_out;
  TrainOptions train_options;
  bool train_force = false;
  train->add_option("--dataset", dataset_path, "value-sample JSONL")->required();
  train->add_option("--model-out", model_out, "output model JSON")->required();
  train->add_option("--report-out", report_out, "optional training report JSON");
  train->add_option("--epochs", train_options.epochs, "SGD epochs");
  train->add_option("--learning-rate", train_options.learning_rate, "SGD learning rate");
  train->add_option("--l2", train_options.l2, "L2 penalty");
  train->add_option("--seed", train_options.seed, "shuffle seed");
  train->add_option("--dim", train_options.features.dim, "hashed feature dimension");
  train->add_flag("--force", train_force, "allow overwriting existing outputs");

  CLI::App* bon = app.add_subcommand("bon", "best-of-n evaluation");
  add_run_flags(bon, f);
  add_scorer_flags(bon, f);
  add_inference_flags(bon, f);

  CLI::App* beam = app.add_subcommand("beam", "step-level beam search evaluation");
  add_run_flags(beam, f);
  add_scorer_flags(beam, f);
  add_inference_flags(beam, f);

  CLI::App* eval = app.add_subcommand("eval", "evaluate greedy|bon|beam");
  std::string method = "greedy";
  eval->add_option("--method", method, "greedy|bon|beam")
      ->required()
      ->check(CLI::IsMember({"greedy", "bon", "beam"}));
  add_run_flags(eval, f);
  add_scorer_flags(eval, f);
  add_inference_flags(eval, f);

  CLI::App* perturb = app.add_subcommand("perturb", "action-surface robustness deltas");
  std::vector<std::string> rules = {"synonym-swap", "argument-reorder", "whitespace-collapse"};
  std::string perturb_method = "bon";
  perturb->add_option("--rules", rules, "perturbation rules")
      ->delimiter(',')
      ->check(CLI::IsMember(perturbation_rules()));
  perturb->add_option("--method", perturb_method, "evaluation method")
      ->check(CLI::IsMember({"greedy", "bon", "beam"}));
  add_run_flags(perturb, f);
  add_scorer_flags(perturb, f);
  add_inference_flags(perturb, f);

  CLI::App* pref = app.add_subcommand("pref-acc", "scorer preference accuracy on state pairs");
  double threshold = 0.3;
  pref->add_option("--threshold", threshold, "progress-difference threshold");
  add_run_flags(pref, f);
  add_scorer_flags(pref, f);

  try {
    app.parse(argc, argv);

    if (app.got_subcommand(annotate)) {
      ExperimentConfig config = resolve_config(annotate, f);
      AnnotateResult r = cmd_annotate(config);
      std::printf("annotated %d tasks (%d failed), %zu samples -> %s\n", r.tasks, r.failed,
                  r.samples, r.dataset_path.c_str());
      if (r.failed * 10 > r.tasks) {
        std::fprintf(stderr, "error: more than 10%% of tasks failed annotation\n");
        return 2;
      }
      return 0;
    }
    if (app.got_subcommand(train)) {
      TrainResult r = cmd_train_scorer(dataset_path, model_out, train_options, train_force,
                                       report_out);
      std::printf("trained on %zu samples, %d epochs, final mse %.6f -> %s\n", r.report.samples,
                  r.report.epochs, r.report.final_mse, r.model_path.c_str());
      return 0;
    }
    if (app.got_subcommand(bon)) return run_eval(bon, f, "bon");
    if (app.got_subcommand(beam)) return run_eval(beam, f, "beam");
    if (app.got_subcommand(eval)) return run_eval(eval, f, method);
    if (app.got_subcommand(perturb)) {
      ExperimentConfig config = resolve_config(perturb, f);
      PerturbReport r = cmd_perturb(config, rules, perturb_method);
      std::fputs(r.to_text().c_str(), stdout);
      return 0;
    }
    if (app.got_subcommand(pref)) {
      ExperimentConfig config = resolve_config(pref, f);
      PrefAccReport r = cmd_pref_acc(config, threshold);
      if (r.defined)
        std::printf("preference accuracy %.4f over %zu pairs (%zu states)\n", r.accuracy, r.pairs,
                    r.states);
      else
        std::printf("preference accuracy undefined: no qualifying pairs (%zu states)\n",
                    r.states);
      return 0;
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const RemoteUnavailableError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
