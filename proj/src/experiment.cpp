#include "rgs/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "rgs/errors.hpp"
#include "rgs/judge.hpp"
#include "rgs/remote.hpp"
#include "rgs/rng.hpp"

namespace rgs {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config serialization

static RenderOptions render_from_json(const json& j) {
  RenderOptions r;
  r.include_thought = j.value("include_thought", r.include_thought);
  r.include_observations = j.value("include_observations", r.include_observations);
  r.include_last_observation = j.value("include_last_observation", r.include_last_observation);
  return r;
}

static json render_to_json(const RenderOptions& r) {
  return {{"include_thought", r.include_thought},
          {"include_observations", r.include_observations},
          {"include_last_observation", r.include_last_observation}};
}

namespace {

// A typo'd key silently falling back to defaults is the worst failure mode a
// config file can have, so every object rejects keys it does not understand.
void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(std::string("unknown config key \"") + it.key() + "\" in " + where);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "config",
             {"suite", "seed", "output_dir", "jobs", "policy", "scorer", "annotate", "inference"});
  c.suite_path = j.value("suite", "");
  c.seed = j.value("seed", std::uint64_t{0});
  c.output_dir = j.value("output_dir", "");
  c.jobs = j.value("jobs", 1);
  if (j.contains("policy")) {
    const json& p = j["policy"];
    check_keys(p, "policy", {"kind", "path", "endpoint", "smoothing"});
    c.policy.kind = p.value("kind", c.policy.kind);
    c.policy.path = p.value("path", "");
    c.policy.endpoint = p.value("endpoint", "");
    c.policy.smoothing = p.value("smoothing", c.policy.smoothing);
  }
  if (j.contains("scorer")) {
    const json& s = j["scorer"];
    check_keys(s, "scorer", {"kind", "model", "beta", "endpoint", "random_seed"});
    c.scorer.kind = s.value("kind", c.scorer.kind);
    c.scorer.model_path = s.value("model", "");
    c.scorer.beta = s.value("beta", c.scorer.beta);
    c.scorer.endpoint = s.value("endpoint", "");
    c.scorer.random_seed = s.value("random_seed", std::uint64_t{0});
  }
  if (j.contains("annotate")) {
    const json& a = j["annotate"];
    check_keys(a, "annotate",
               {"iterations", "exploration_c", "expansion_width", "simulations", "rollout_mode",
                "temperature", "min_visits", "render"});
    c.annotate.search.iterations = a.value("iterations", c.annotate.search.iterations);
    c.annotate.search.exploration_c = a.value("exploration_c", c.annotate.search.exploration_c);
    c.annotate.search.expansion_width =
        a.value("expansion_width", c.annotate.search.expansion_width);
    c.annotate.search.simulations = a.value("simulations", c.annotate.search.simulations);
    c.annotate.search.rollout_mode = a.value("rollout_mode", std::string("greedy")) == "sampled"
                                         ? RolloutKind::sampled
                                         : RolloutKind::greedy;
    c.annotate.search.temperature = a.value("temperature", c.annotate.search.temperature);
    c.annotate.min_visits = a.value("min_visits", c.annotate.min_visits);
    if (a.contains("render")) {
      check_keys(a["render"], "annotate.render",
                 {"include_thought", "include_observations", "include_last_observation"});
      c.annotate.render = render_from_json(a["render"]);
    }
  }
  if (j.contains("inference")) {
    const json& i = j["inference"];
    check_keys(i, "inference", {"n", "beam_width", "expansion_width", "temperature", "repeats"});
    c.inference.n = i.value("n", c.inference.n);
    c.inference.beam_width = i.value("beam_width", c.inference.beam_width);
    c.inference.expansion_width = i.value("expansion_width", c.inference.expansion_width);
    c.inference.temperature = i.value("temperature", c.inference.temperature);
    c.inference.repeats = i.value("repeats", c.inference.repeats);
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["suite"] = suite_path;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["jobs"] = jobs;
  j["policy"] = {{"kind", policy.kind},
                 {"path", policy.path},
                 {"endpoint", policy.endpoint},
                 {"smoothing", policy.smoothing}};
  j["scorer"] = {{"kind", scorer.kind},
                 {"model", scorer.model_path},
                 {"beta", scorer.beta},
                 {"endpoint", scorer.endpoint},
                 {"random_seed", scorer.random_seed}};
  j["annotate"] = {
      {"iterations", annotate.search.iterations},
      {"exploration_c", annotate.search.exploration_c},
      {"expansion_width", annotate.search.expansion_width},
      {"simulations", annotate.search.simulations},
      {"rollout_mode", annotate.search.rollout_mode == RolloutKind::sampled ? "sampled" : "greedy"},
      {"temperature", annotate.search.temperature},
      {"min_visits", annotate.min_visits},
      {"render", render_to_json(annotate.render)}};
  j["inference"] = {{"n", inference.n},
                    {"beam_width", inference.beam_width},
                    {"expansion_width", inference.expansion_width},
                    {"temperature", inference.temperature},
                    {"repeats", inference.repeats}};
  return j;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Output plumbing

static void guard_path(const fs::path& p, bool force) {
  if (!force && fs::exists(p))
    throw ConfigError("refusing to overwrite " + p.string() + "; pass --force");
}

static void write_file(const fs::path& p, const std::string& content, bool force) {
  guard_path(p, force);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
}

static void write_config_snapshot(const ExperimentConfig& config) {
  write_file(fs::path(config.output_dir) / "config.json", config.to_json().dump(2) + "\n",
             config.force);
}

static void write_meta(const ExperimentConfig& config, double wall_seconds) {
  json meta = {{"wall_seconds", wall_seconds}};
  // Volatile by nature, so it is exempt from the overwrite guard and never
  // part of a run's reproducibility contract.
  fs::create_directories(config.output_dir);
  std::ofstream out(fs::path(config.output_dir) / "meta.json");
  out << meta.dump(2) << "\n";
}

static void parallel_for(std::size_t count, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Factories

std::shared_ptr<const Policy> build_policy(const PolicySpec& spec, const Environment& env) {
  if (spec.kind == "uniform")
    return std::make_shared<TabularPolicy>(TabularPolicy::uniform(env.spec().action_vocabulary));
  if (spec.kind == "imitation") {
    std::vector<EpisodeResult> expert = {expert_episode(env)};
    return std::make_shared<TabularPolicy>(
        imitation_fit(expert, env.spec().action_vocabulary, spec.smoothing));
  }
  if (spec.kind == "file") {
    if (spec.path.empty()) throw ConfigError("policy kind \"file\" needs a path");
    return std::make_shared<TabularPolicy>(TabularPolicy::load(spec.path));
  }
  if (spec.kind == "remote") {
    if (spec.endpoint.empty()) throw ConfigError("policy kind \"remote\" needs an endpoint");
    return std::make_shared<RemotePolicy>(spec.endpoint);
  }
  throw ConfigError("unknown policy kind \"" + spec.kind + "\"");
}

static std::shared_ptr<const Scorer> build_scorer(const ScorerSpec& spec, const TaskContext& ctx,
                                                  const std::shared_ptr<const Scorer>& shared) {
  if (spec.kind == "oracle") return std::make_shared<OracleScorer>(*ctx.env, *ctx.policy);
  if (spec.kind == "implicit")
    return std::make_shared<ImplicitScorer>(*ctx.policy, *ctx.reference, spec.beta);
  if (spec.kind == "explicit" || spec.kind == "random") return shared;
  if (spec.kind == "judge") return nullptr;  // selector-only, handled by the caller
  throw ConfigError("unknown scorer kind \"" + spec.kind + "\"");
}

std::vector<TaskContext> build_contexts(const ExperimentConfig& config,
                                        const std::vector<TaskSpec>& suite) {
  std::shared_ptr<const Scorer> shared;
  if (config.scorer.kind == "explicit") {
    if (config.scorer.model_path.empty())
      throw ConfigError("scorer kind \"explicit\" needs a model file");
    shared = std::make_shared<ExplicitScorer>(HashedLinearModel::load(config.scorer.model_path));
  } else if (config.scorer.kind == "random") {
    shared = std::make_shared<RandomScorer>(config.scorer.random_seed);
  }
  std::vector<TaskContext> contexts;
  contexts.reserve(suite.size());
  for (const TaskSpec& task : suite) {
    TaskContext ctx;
    ctx.env = make_environment(task);
    ctx.policy = build_policy(config.policy, *ctx.env);
    ctx.reference = std::make_shared<TabularPolicy>(
        TabularPolicy::uniform(ctx.env->spec().action_vocabulary));
    ctx.scorer = build_scorer(config.scorer, ctx, shared);
    contexts.push_back(std::move(ctx));
  }
  return contexts;
}

// ---------------------------------------------------------------------------
// annotate

AnnotateResult cmd_annotate(const ExperimentConfig& config) {
  auto t0 = std::chrono::steady_clock::now();
  if (config.output_dir.empty()) throw ConfigError("annotate needs an output directory");
  std::vector<TaskSpec> suite = load_task_suite(config.suite_path);

  fs::path dir(config.output_dir);
  fs::path dataset_path = dir / "dataset.jsonl";
  guard_path(dir / "config.json", config.force);
  guard_path(dataset_path, config.force);
  for (const TaskSpec& t : suite) guard_path(dir / "trees" / (t.task_id + ".json"), config.force);

  // Scorers play no role during annotation; build envs and policies directly
  // so an explicit-scorer config can annotate before its model exists.
  ExperimentConfig no_scorer = config;
  no_scorer.scorer.kind = "random";
  std::vector<TaskContext> contexts = build_contexts(no_scorer, suite);

  struct Slot {
    bool ok = false;
    std::string error;
    std::string tree_json;
    std::vector<ValueSample> samples;
  };
  std::vector<Slot> slots(suite.size());
  parallel_for(suite.size(), config.jobs, [&](std::size_t i) {
    Slot& slot = slots[i];
    try {
      SearchConfig sc = config.annotate.search;
      sc.seed = derive_seed(config.seed, suite[i].task_id, 2);
      SearchTree tree = build_tree(*contexts[i].env, *contexts[i].policy, sc);
      slot.tree_json = tree_to_json(tree);
      slot.samples = extract_value_samples(tree, config.annotate.min_visits,
                                           config.annotate.render);
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });

  AnnotateResult result;
  result.tasks = static_cast<int>(suite.size());
  result.dataset_path = dataset_path.string();
  std::vector<ValueSample> dataset;
  fs::create_directories(dir / "trees");
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (!slots[i].ok) {
      std::fprintf(stderr, "warning: annotation failed for %s: %s\n", suite[i].task_id.c_str(),
                   slots[i].error.c_str());
      ++result.failed;
      continue;
    }
    write_file(dir / "trees" / (suite[i].task_id + ".json"), slots[i].tree_json, config.force);
    dataset.insert(dataset.end(), slots[i].samples.begin(), slots[i].samples.end());
  }
  result.samples = dataset.size();
  if (dataset.empty())
    std::fprintf(stderr, "warning: extracted dataset is empty (min_visits=%d)\n",
                 config.annotate.min_visits);
  write_value_samples(dataset_path.string(), dataset);
  write_config_snapshot(config);
  write_meta(config, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return result;
}

// ---------------------------------------------------------------------------
// train-scorer

TrainResult cmd_train_scorer(const std::string& dataset_path, const std::string& model_out,
                             const TrainOptions& options, bool force,
                             const std::string& report_out) {
  std::vector<ValueSample> dataset = read_value_samples(dataset_path);
  if (dataset.empty()) throw ConfigError("training dataset " + dataset_path + " has no samples");
  TrainResult result;
  HashedLinearModel model = train_explicit(dataset, options, &result.report);
  guard_path(model_out, force);
  fs::path out(model_out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  model.save(model_out);
  result.model_path = model_out;
  if (!report_out.empty()) {
    json j = {{"final_mse", result.report.final_mse},
              {"epochs", result.report.epochs},
              {"samples", result.report.samples}};
    write_file(report_out, j.dump(2) + "\n", force);
  }
  return result;
}

// ---------------------------------------------------------------------------
// eval

json EvaluationReport::to_json() const {
  json rows_json = json::array();
  for (const TaskRow& r : rows)
    rows_json.push_back({{"task_id", r.task_id},
                         {"weight", r.weight},
                         {"episodes", r.episodes},
                         {"mean_reward", r.mean_reward},
                         {"mean_progress", r.mean_progress}});
  return {{"method", method},
          {"scorer", scorer},
          {"rows", rows_json},
          {"suite_mean", suite_mean},
          {"suite_progress", suite_progress},
          {"judge_fallbacks", judge_fallbacks}};
}

std::string EvaluationReport::to_text() const {
  std::size_t width = 4;
  for (const TaskRow& r : rows) width = std::max(width, r.task_id.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %6s  %8s  %11s  %13s\n", static_cast<int>(width),
                "task", "weight", "episodes", "mean_reward", "mean_progress");
  out << line;
  for (const TaskRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-*s  %6d  %8d  %11.4f  %13.4f\n",
                  static_cast<int>(width), r.task_id.c_str(), r.weight, r.episodes, r.mean_reward,
                  r.mean_progress);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-*s  %6s  %8s  %11.4f  %13.4f\n", static_cast<int>(width),
                "suite", "", "", suite_mean, suite_progress);
  out << line;
  out << "method: " << method << "  scorer: " << scorer
      << "  judge_fallbacks: " << judge_fallbacks << "\n";
  return out.str();
}

EvaluationReport cmd_eval(const ExperimentConfig& config, const std::string& method,
                          bool write_outputs) {
  auto t0 = std::chrono::steady_clock::now();
  if (method != "greedy" && method != "bon" && method != "beam")
    throw ConfigError("unknown evaluation method \"" + method + "\"");
  bool uses_judge = config.scorer.kind == "judge" && method != "greedy";
  if (config.scorer.kind == "judge" && method == "beam")
    throw ConfigError("the judge only ranks candidate sets; beam search needs a state scorer");
  if (uses_judge && config.inference.n > 5)
    throw ConfigError("judge-selected best-of-n is capped at 5 candidates");

  std::vector<TaskSpec> suite = load_task_suite(config.suite_path);
  ExperimentConfig ctx_config = config;
  if (uses_judge || method == "greedy") ctx_config.scorer.kind = "random";  // placeholder only
  std::vector<TaskContext> contexts = build_contexts(ctx_config, suite);

  std::optional<JudgeClient> judge;
  if (uses_judge) {
    if (config.scorer.endpoint.empty())
      throw ConfigError("scorer kind \"judge\" needs an endpoint");
    judge.emplace(config.scorer.endpoint);
  }

  struct Slot {
    TaskRow row;
    int fallbacks = 0;
    std::vector<std::string> trace_lines;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(suite.size());
  parallel_for(suite.size(), config.jobs, [&](std::size_t i) {
    Slot& slot = slots[i];
    try {
      const Environment& env = *contexts[i].env;
      const Policy& policy = *contexts[i].policy;
      int reps = method == "greedy" ? 1 : config.inference.repeats;
      double sum_reward = 0.0;
      double sum_progress = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        std::uint64_t rep_seed = derive_seed(config.seed, "eval", static_cast<std::uint64_t>(rep));
        EpisodeResult ep;
        if (method == "greedy") {
          ep = greedy_decode(env, policy);
        } else if (method == "bon") {
          BestOfNResult r;
          if (uses_judge) {
            r = best_of_n_judge(env, policy, *judge, config.inference.n,
                                config.inference.temperature, rep_seed);
            slot.fallbacks += r.judge_fallbacks;
          } else {
            r = best_of_n(env, policy, *contexts[i].scorer, config.inference.n,
                          config.inference.temperature, rep_seed);
          }
          ep = r.episode;
        } else {
          BeamConfig bc;
          bc.beam_width = config.inference.beam_width;
          bc.expansion_width = config.inference.expansion_width;
          bc.temperature = config.inference.temperature;
          BeamResult r = beam_search(env, policy, *contexts[i].scorer, bc, rep_seed);
          ep = r.episode;
          for (const BeamLayerTrace& layer : r.layers) {
            json kept = layer.kept;
            json jl = {{"rep", rep},
                       {"layer", layer.layer},
                       {"candidates", layer.candidates},
                       {"scores", layer.scores},
                       {"kept", kept}};
            slot.trace_lines.push_back(jl.dump());
          }
        }
        sum_reward += ep.outcome_reward;
        sum_progress += ep.progress_rate.value_or(ep.outcome_reward);
      }
      slot.row = {suite[i].task_id, suite[i].weight, reps, sum_reward / reps,
                  sum_progress / reps};
    } catch (...) {
      slot.error = std::current_exception();
    }
  });
  // Eval failures abort the whole run with their original type; partial
  // reports would not be comparable across methods.
  for (const Slot& slot : slots)
    if (slot.error) std::rethrow_exception(slot.error);

  EvaluationReport report;
  report.method = method;
  report.scorer = method == "greedy" ? "none" : config.scorer.kind;
  double weight_sum = 0.0;
  for (Slot& slot : slots) {
    report.rows.push_back(slot.row);
    report.judge_fallbacks += slot.fallbacks;
    weight_sum += slot.row.weight;
    report.suite_mean += slot.row.weight * slot.row.mean_reward;
    report.suite_progress += slot.row.weight * slot.row.mean_progress;
  }
  report.suite_mean /= weight_sum;
  report.suite_progress /= weight_sum;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (write_outputs) {
    if (config.output_dir.empty()) throw ConfigError("eval needs an output directory");
    fs::path dir(config.output_dir);
    write_config_snapshot(config);
    write_file(dir / "report.json", report.to_json().dump(2) + "\n", config.force);
    write_file(dir / "report.txt", report.to_text(), config.force);
    if (method == "beam") {
      for (std::size_t i = 0; i < suite.size(); ++i) {
        std::string content;
        for (const std::string& l : slots[i].trace_lines) content += l + "\n";
        write_file(dir / "traces" / (suite[i].task_id + ".jsonl"), content, config.force);
      }
    }
    write_meta(config, report.wall_seconds);
  }
  return report;
}

// ---------------------------------------------------------------------------
// perturb

const std::vector<std::string>& perturbation_rules() {
  static const std::vector<std::string> rules = {"identity", "synonym-swap", "argument-reorder",
                                                 "whitespace-collapse"};
  return rules;
}

static std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> words;
  std::istringstream in(s);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

static std::string apply_rule(const std::string& rule, const std::string& command) {
  if (rule == "identity") return command;
  if (rule == "synonym-swap") {
    static const std::map<std::string, std::string> synonyms = {{"move", "go"},
                                                                {"look", "survey"},
                                                                {"inspect", "examine"},
                                                                {"buy", "purchase"}};
    std::vector<std::string> words = split_words(command);
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      auto it = synonyms.find(words[i]);
      if (!out.empty()) out += ' ';
      out += it == synonyms.end() ? words[i] : it->second;
    }
    return out;
  }
  if (rule == "argument-reorder") {
    std::vector<std::string> words = split_words(command);
    if (words.size() < 2) return command;
    std::string out;
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (!out.empty()) out += ' ';
      out += words[i];
    }
    return out + ' ' + words[0];
  }
  if (rule == "whitespace-collapse") {
    std::string out;
    for (char c : command)
      if (c != ' ') out += c;
    return out;
  }
  throw ConfigError("unknown perturbation rule \"" + rule + "\"");
}

std::vector<TaskSpec> perturb_suite(const std::vector<TaskSpec>& suite, const std::string& rule) {
  std::vector<TaskSpec> out;
  out.reserve(suite.size());
  for (const TaskSpec& task : suite) {
    std::unique_ptr<Environment> env = make_environment(task);
    TaskSpec p = task;
    p.actions.clear();
    p.aliases.clear();
    for (const std::string& cmd : env->spec().action_vocabulary) {
      auto alias = task.aliases.find(cmd);
      std::string canonical = alias == task.aliases.end() ? cmd : alias->second;
      std::string surface = apply_rule(rule, cmd);
      if (std::find(p.actions.begin(), p.actions.end(), surface) != p.actions.end())
        throw ConfigError("rule " + rule + " collides on \"" + surface + "\" in task " +
                          task.task_id);
      p.actions.push_back(surface);
      if (surface != canonical) p.aliases[surface] = canonical;
    }
    make_environment(p);  // validate the rewrite
    out.push_back(std::move(p));
  }
  return out;
}

json PerturbReport::to_json() const {
  json rule_rows = json::array();
  for (std::size_t i = 0; i < rules.size(); ++i)
    rule_rows.push_back({{"rule", rules[i]},
                         {"suite_mean", rule_means[i]},
                         {"delta", rule_means[i] - original_mean}});
  return {{"method", method},
          {"original_mean", original_mean},
          {"rules", rule_rows},
          {"average", average},
          {"stddev", stddev}};
}

std::string PerturbReport::to_text() const {
  std::size_t width = 8;
  for (const std::string& r : rules) width = std::max(width, r.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %10s  %8s\n", static_cast<int>(width), "variant",
                "suite_mean", "delta");
  out << line;
  std::snprintf(line, sizeof(line), "%-*s  %10.4f  %8.4f\n", static_cast<int>(width), "original",
                original_mean, 0.0);
  out << line;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    std::snprintf(line, sizeof(line), "%-*s  %10.4f  %8.4f\n", static_cast<int>(width),
                  rules[i].c_str(), rule_means[i], rule_means[i] - original_mean);
    out << line;
  }
  std::snprintf(line, sizeof(line), "average %.4f  stddev %.4f  method %s\n", average, stddev,
                method.c_str());
  out << line;
  return out.str();
}

PerturbReport cmd_perturb(const ExperimentConfig& config, const std::vector<std::string>& rules,
                          const std::string& method) {
  auto t0 = std::chrono::steady_clock::now();
  if (rules.empty()) throw ConfigError("perturb needs at least one rule");
  for (const std::string& r : rules)
    if (std::find(perturbation_rules().begin(), perturbation_rules().end(), r) ==
        perturbation_rules().end())
      throw ConfigError("unknown perturbation rule \"" + r + "\"");
  if (config.output_dir.empty()) throw ConfigError("perturb needs an output directory");

  std::vector<TaskSpec> suite = load_task_suite(config.suite_path);
  PerturbReport report;
  report.method = method;
  report.rules = rules;
  report.original_mean = cmd_eval(config, method, /*write_outputs=*/false).suite_mean;

  fs::path dir(config.output_dir);
  for (const std::string& rule : rules) {
    std::vector<TaskSpec> perturbed = perturb_suite(suite, rule);
    fs::path suite_path = dir / "suites" / (rule + ".json");
    guard_path(suite_path, config.force);
    fs::create_directories(suite_path.parent_path());
    save_task_suite(suite_path.string(), perturbed);
    ExperimentConfig variant = config;
    variant.suite_path = suite_path.string();
    report.rule_means.push_back(cmd_eval(variant, method, /*write_outputs=*/false).suite_mean);
  }

  std::vector<double> columns = {report.original_mean};
  columns.insert(columns.end(), report.rule_means.begin(), report.rule_means.end());
  double mean = 0.0;
  for (double c : columns) mean += c;
  mean /= static_cast<double>(columns.size());
  double var = 0.0;
  for (double c : columns) var += (c - mean) * (c - mean);
  report.average = mean;
  report.stddev = columns.size() > 1
                      ? std::sqrt(var / static_cast<double>(columns.size() - 1))
                      : 0.0;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_config_snapshot(config);
  write_file(dir / "perturb_report.json", report.to_json().dump(2) + "\n", config.force);
  write_file(dir / "perturb_report.txt", report.to_text(), config.force);
  write_meta(config, report.wall_seconds);
  return report;
}

// ---------------------------------------------------------------------------
// pref-acc

json PrefAccReport::to_json() const {
  json j = {{"threshold", threshold},
            {"states", states},
            {"pairs", pairs},
            {"correct", correct}};
  if (defined)
    j["accuracy"] = accuracy;
  else
    j["accuracy"] = nullptr;
  return j;
}

PrefAccReport cmd_pref_acc(const ExperimentConfig& config, double threshold,
                           bool write_outputs) {
  auto t0 = std::chrono::steady_clock::now();
  if (config.scorer.kind == "judge")
    throw ConfigError("the judge only ranks candidate sets; preference accuracy needs a scorer");
  std::vector<TaskSpec> suite = load_task_suite(config.suite_path);
  std::vector<TaskContext> contexts = build_contexts(config, suite);

  PrefAccReport report;
  report.threshold = threshold;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    std::vector<EpisodeResult> episodes = enumerate_all_episodes(*contexts[i].env);
    std::vector<double> progress;
    std::vector<double> scores;
    for (const EpisodeResult& e : episodes) {
      progress.push_back(e.progress_rate.value_or(e.outcome_reward));
      scores.push_back(contexts[i].scorer->score(e.final_state));
    }
    report.states += episodes.size();
    for (std::size_t a = 0; a < episodes.size(); ++a) {
      for (std::size_t b = a + 1; b < episodes.size(); ++b) {
        if (std::fabs(progress[a] - progress[b]) <= threshold) continue;
        ++report.pairs;
        bool correct = (progress[a] > progress[b] && scores[a] > scores[b]) ||
                       (progress[a] < progress[b] && scores[a] < scores[b]);
        if (correct) ++report.correct;
      }
    }
  }
  report.defined = report.pairs > 0;
  report.accuracy =
      report.defined ? static_cast<double>(report.correct) / static_cast<double>(report.pairs)
                     : 0.0;
  if (!report.defined)
    std::fprintf(stderr, "warning: no state pairs exceed the progress threshold %.3f\n",
                 threshold);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (write_outputs) {
    if (config.output_dir.empty()) throw ConfigError("pref-acc needs an output directory");
    write_config_snapshot(config);
    write_file(fs::path(config.output_dir) / "pref_acc.json", report.to_json().dump(2) + "\n",
               config.force);
    write_meta(config, report.wall_seconds);
  }
  return report;
}

}  // namespace rgs
