#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgs/dataset.hpp"
#include "rgs/env.hpp"
#include "rgs/errors.hpp"
#include "rgs/experiment.hpp"
#include "rgs/mcts.hpp"
#include "rgs/scorer.hpp"

using namespace rgs;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string data_path(const std::string& rel) {
  return std::string(RGS_DATA_DIR) + "/" + rel;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

// Every case gets a scratch directory under the system temp root and starts
// from a clean slate so reruns do not trip the overwrite guard.
fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "rgs_test_experiment" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Greedy decoding under a uniform tabular policy always takes the first
// vocabulary entry (argmax ties resolve to the lowest index), so the reward
// it earns can be recomputed with nothing but the environment.
EpisodeResult first_action_rollout(const Environment& env) {
  TrajectoryState state = env.reset();
  while (!state.terminal) state = env.step(state, {"", env.spec().action_vocabulary[0]});
  EpisodeResult ep;
  ep.outcome_reward = env.outcome_reward(state);
  ep.progress_rate = env.progress_rate(state);
  ep.final_state = state;
  return ep;
}

ExperimentConfig base_config(const std::string& suite, const fs::path& out_dir) {
  ExperimentConfig c;
  c.suite_path = data_path(suite);
  c.output_dir = out_dir.string();
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("config defaults survive an empty object and round-trip byte for byte") {
  ExperimentConfig c = ExperimentConfig::from_json(json::object());
  CHECK(c.suite_path.empty());
  CHECK(c.seed == 0);
  CHECK(c.jobs == 1);
  CHECK(c.policy.kind == "uniform");
  CHECK(c.policy.smoothing == doctest::Approx(1.0));
  CHECK(c.scorer.kind == "oracle");
  CHECK(c.scorer.beta == doctest::Approx(0.05));
  CHECK(c.annotate.search.iterations == 40);
  CHECK(c.annotate.search.exploration_c == doctest::Approx(0.5));
  CHECK(c.annotate.search.expansion_width == 5);
  CHECK(c.annotate.search.simulations == 1);
  CHECK(c.annotate.search.rollout_mode == RolloutKind::greedy);
  CHECK(c.annotate.min_visits == 3);
  CHECK(c.annotate.render.include_thought);
  CHECK(c.annotate.render.include_observations);
  CHECK_FALSE(c.annotate.render.include_last_observation);
  CHECK(c.inference.n == 5);
  CHECK(c.inference.beam_width == 5);
  CHECK(c.inference.expansion_width == 5);
  CHECK(c.inference.repeats == 16);

  c.suite_path = "some/suite.json";
  c.seed = 99;
  c.output_dir = "runs/x";
  c.jobs = 4;
  c.policy.kind = "imitation";
  c.policy.smoothing = 0.25;
  c.scorer.kind = "explicit";
  c.scorer.model_path = "model.json";
  c.annotate.search.rollout_mode = RolloutKind::sampled;
  c.annotate.search.temperature = 0.7;
  c.annotate.min_visits = 1;
  c.annotate.render.include_last_observation = true;
  c.inference.n = 3;
  c.inference.repeats = 2;

  std::string once = c.to_json().dump(2);
  ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json().dump(2) == once);
  CHECK(back.annotate.search.rollout_mode == RolloutKind::sampled);

  // force is a command-line affair, never part of the snapshot
  CHECK_FALSE(c.to_json().contains("force"));
}

TEST_CASE("unknown config keys are rejected with their location") {
  auto expect_reject = [](const json& j, const std::string& key, const std::string& where) {
    try {
      ExperimentConfig::from_json(j);
      FAIL_CHECK("no error for key " << key << " in " << where);
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "unknown config key \"" + key + "\" in " + where));
    }
  };
  expect_reject(json{{"bogus", 1}}, "bogus", "config");
  expect_reject(json{{"policy", {{"knd", "uniform"}}}}, "knd", "policy");
  expect_reject(json{{"scorer", {{"betaa", 0.1}}}}, "betaa", "scorer");
  expect_reject(json{{"annotate", {{"iterationss", 7}}}}, "iterationss", "annotate");
  expect_reject(json{{"annotate", {{"render", {{"include_thoughts", true}}}}}},
                "include_thoughts", "annotate.render");
  expect_reject(json{{"inference", {{"nn", 2}}}}, "nn", "inference");
}

TEST_CASE("config load reports unreadable and malformed files") {
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
  fs::path dir = fresh_dir("config_load");
  fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  try {
    ExperimentConfig::load(bad.string());
    FAIL_CHECK("malformed config accepted");
  } catch (const ConfigError& e) {
    CHECK(contains(e.what(), bad.string()));
  }
}

TEST_CASE("annotate writes trees, dataset, and snapshot, and the counts add up") {
  fs::path dir = fresh_dir("annotate");
  ExperimentConfig c = base_config("suites/tiny.json", dir);
  c.annotate.search.iterations = 80;
  c.annotate.search.expansion_width = 4;
  c.annotate.min_visits = 1;

  AnnotateResult result = cmd_annotate(c);
  CHECK(result.tasks == 3);
  CHECK(result.failed == 0);
  CHECK(result.samples > 0);
  CHECK(result.dataset_path == (dir / "dataset.jsonl").string());

  for (const char* id : {"tiny_corridor", "tiny_span", "tiny_shop"})
    CHECK(fs::exists(dir / "trees" / (std::string(id) + ".json")));
  CHECK(fs::exists(dir / "dataset.jsonl"));
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "meta.json"));

  std::vector<ValueSample> dataset = read_value_samples(result.dataset_path);
  CHECK(dataset.size() == result.samples);

  // Re-derive the dataset from the trees on disk; the command must be exactly
  // the concatenation of each task's extraction.
  std::size_t recount = 0;
  std::map<std::string, std::size_t> per_task;
  for (const ValueSample& s : dataset) ++per_task[s.task_id];
  for (const char* id : {"tiny_corridor", "tiny_span", "tiny_shop"}) {
    SearchTree tree = tree_from_json(slurp((dir / "trees" / (std::string(id) + ".json")).string()));
    std::vector<ValueSample> ext =
        extract_value_samples(tree, c.annotate.min_visits, c.annotate.render);
    recount += ext.size();
    CHECK(per_task[id] == ext.size());
  }
  CHECK(recount == result.samples);

  // The snapshot parses back to the same resolved configuration.
  ExperimentConfig snap = ExperimentConfig::load((dir / "config.json").string());
  CHECK(snap.to_json().dump(2) == c.to_json().dump(2));

  SUBCASE("a second run into the same directory needs --force") {
    try {
      cmd_annotate(c);
      FAIL_CHECK("overwrite guard did not fire");
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "refusing to overwrite"));
      CHECK(contains(e.what(), "pass --force"));
    }
    std::string before = slurp((dir / "dataset.jsonl").string());
    ExperimentConfig forced = c;
    forced.force = true;
    AnnotateResult again = cmd_annotate(forced);
    CHECK(again.samples == result.samples);
    CHECK(slurp((dir / "dataset.jsonl").string()) == before);
  }
}

TEST_CASE("annotate with an unreachable visit filter still writes a readable empty dataset") {
  fs::path dir = fresh_dir("annotate_empty");
  ExperimentConfig c = base_config("suites/tiny.json", dir);
  c.annotate.search.iterations = 10;
  c.annotate.min_visits = 100000;
  AnnotateResult result = cmd_annotate(c);
  CHECK(result.samples == 0);
  CHECK(read_value_samples(result.dataset_path).empty());
}

TEST_CASE("annotate requires an output directory") {
  ExperimentConfig c = base_config("suites/tiny.json", "");
  c.output_dir = "";
  CHECK_THROWS_AS(cmd_annotate(c), ConfigError);
}

TEST_CASE("train-scorer produces a loadable model, a report, and respects the guard") {
  fs::path dir = fresh_dir("train");
  ExperimentConfig c = base_config("suites/tiny.json", dir / "ann");
  c.annotate.search.iterations = 120;
  c.annotate.min_visits = 1;
  AnnotateResult ann = cmd_annotate(c);
  REQUIRE(ann.samples > 0);

  TrainOptions opt;
  opt.epochs = 30;
  std::string model_out = (dir / "model.json").string();
  std::string report_out = (dir / "train_report.json").string();
  TrainResult tr = cmd_train_scorer(ann.dataset_path, model_out, opt, false, report_out);
  CHECK(tr.model_path == model_out);
  CHECK(tr.report.samples == ann.samples);
  CHECK(fs::exists(model_out));

  json report = json::parse(slurp(report_out));
  CHECK(report.at("samples").get<std::size_t>() == ann.samples);
  CHECK(report.at("epochs").get<int>() >= 0);
  CHECK(report.at("final_mse").get<double>() >= 0.0);
  CHECK(report.at("final_mse").get<double>() == doctest::Approx(tr.report.final_mse));

  HashedLinearModel model = HashedLinearModel::load(model_out);
  double p = model.predict_text("Task: walk\nObservation: hi\n");
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);

  CHECK_THROWS_AS(cmd_train_scorer(ann.dataset_path, model_out, opt, false), ConfigError);

  SUBCASE("a dataset with zero records is rejected up front") {
    std::string empty_path = (dir / "empty.jsonl").string();
    write_value_samples(empty_path, {});
    try {
      cmd_train_scorer(empty_path, (dir / "m2.json").string(), opt, false);
      FAIL_CHECK("empty dataset accepted");
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "no samples"));
    }
  }
}

TEST_CASE("greedy eval matches a by-hand rollout of the first vocabulary action") {
  fs::path dir = fresh_dir("eval_greedy");
  ExperimentConfig c = base_config("suites/toy.json", dir);
  EvaluationReport report = cmd_eval(c, "greedy");

  std::vector<TaskSpec> suite = load_task_suite(c.suite_path);
  REQUIRE(report.rows.size() == suite.size());

  double weighted = 0.0, weighted_progress = 0.0, weight_sum = 0.0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const TaskRow& row = report.rows[i];
    CHECK(row.task_id == suite[i].task_id);
    CHECK(row.weight == suite[i].weight);
    CHECK(row.episodes == 1);

    std::unique_ptr<Environment> env = make_environment(suite[i]);
    EpisodeResult expect = first_action_rollout(*env);
    CHECK(row.mean_reward == doctest::Approx(expect.outcome_reward).epsilon(1e-12));
    CHECK(row.mean_progress ==
          doctest::Approx(expect.progress_rate.value_or(expect.outcome_reward)).epsilon(1e-12));

    weighted += row.weight * row.mean_reward;
    weighted_progress += row.weight * row.mean_progress;
    weight_sum += row.weight;
  }
  CHECK(report.suite_mean == doctest::Approx(weighted / weight_sum).epsilon(1e-12));
  CHECK(report.suite_progress == doctest::Approx(weighted_progress / weight_sum).epsilon(1e-12));

  // Only grid_north is solvable by spamming the first action; it carries
  // weight 1 of 11.
  CHECK(report.suite_mean == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(report.method == "greedy");
  CHECK(report.scorer == "none");
  CHECK(report.judge_fallbacks == 0);

  json j = report.to_json();
  CHECK_FALSE(j.contains("wall_seconds"));
  CHECK(j.at("rows").size() == suite.size());

  std::string txt = report.to_text();
  CHECK(contains(txt, "method: greedy  scorer: none  judge_fallbacks: 0"));
  CHECK(contains(txt, "grid_north"));
  CHECK(contains(txt, "suite"));

  CHECK(slurp((dir / "report.json").string()) == j.dump(2) + "\n");
  CHECK(slurp((dir / "report.txt").string()) == txt);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "meta.json"));
}

TEST_CASE("sampled eval is deterministic and independent of the job count") {
  ExperimentConfig c = base_config("suites/tiny.json", "");
  c.scorer.kind = "random";
  c.scorer.random_seed = 5;
  c.inference.n = 3;
  c.inference.repeats = 4;

  c.jobs = 1;
  EvaluationReport serial = cmd_eval(c, "bon", /*write_outputs=*/false);
  c.jobs = 4;
  EvaluationReport parallel = cmd_eval(c, "bon", /*write_outputs=*/false);
  CHECK(serial.to_json().dump(2) == parallel.to_json().dump(2));

  for (const TaskRow& row : serial.rows) CHECK(row.episodes == 4);
  CHECK(serial.scorer == "random");
}

TEST_CASE("oracle-guided best-of-n lifts a suite greedy decoding cannot solve") {
  ExperimentConfig c = base_config("suites/shoptoy.json", "");
  c.inference.n = 6;
  c.inference.repeats = 4;

  EvaluationReport greedy = cmd_eval(c, "greedy", /*write_outputs=*/false);
  CHECK(greedy.suite_mean == doctest::Approx(0.0));

  EvaluationReport bon = cmd_eval(c, "bon", /*write_outputs=*/false);
  CHECK(bon.scorer == "oracle");
  CHECK(bon.suite_mean > greedy.suite_mean);
}

TEST_CASE("beam eval writes one trace file per task with layered records") {
  fs::path dir = fresh_dir("eval_beam");
  ExperimentConfig c = base_config("suites/tiny.json", dir);
  c.inference.beam_width = 2;
  c.inference.expansion_width = 3;
  c.inference.repeats = 2;

  EvaluationReport report = cmd_eval(c, "beam");
  CHECK(report.method == "beam");
  for (const TaskRow& row : report.rows) CHECK(row.episodes == 2);

  for (const char* id : {"tiny_corridor", "tiny_span", "tiny_shop"}) {
    fs::path trace = dir / "traces" / (std::string(id) + ".jsonl");
    REQUIRE(fs::exists(trace));
    std::ifstream in(trace);
    std::string line;
    std::set<int> reps;
    int lines = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      for (const char* key : {"rep", "layer", "candidates", "scores", "kept"})
        CHECK(j.contains(key));
      CHECK(j.at("candidates").size() == j.at("scores").size());
      reps.insert(j.at("rep").get<int>());
      ++lines;
    }
    CHECK(lines >= 2);
    CHECK(reps == std::set<int>{0, 1});
  }
}

TEST_CASE("method and judge combinations are validated before any work happens") {
  ExperimentConfig c = base_config("suites/tiny.json", "");

  CHECK_THROWS_AS(cmd_eval(c, "magic", false), ConfigError);

  c.scorer.kind = "judge";
  try {
    cmd_eval(c, "beam", false);
    FAIL_CHECK("judge+beam accepted");
  } catch (const ConfigError& e) {
    CHECK(contains(e.what(), "beam search needs a state scorer"));
  }

  c.inference.n = 6;
  CHECK_THROWS_AS(cmd_eval(c, "bon", false), ConfigError);

  // Greedy never consults the scorer, so a judge config is fine there.
  EvaluationReport greedy = cmd_eval(c, "greedy", false);
  CHECK(greedy.scorer == "none");

  c.inference.n = 3;
  c.scorer.endpoint = "";
  CHECK_THROWS_AS(cmd_eval(c, "bon", false), ConfigError);  // no endpoint

  ExperimentConfig no_dir = base_config("suites/tiny.json", "");
  no_dir.output_dir = "";
  CHECK_THROWS_AS(cmd_eval(no_dir, "greedy", /*write_outputs=*/true), ConfigError);
}

TEST_CASE("context building validates policy and scorer specs") {
  std::vector<TaskSpec> suite = load_task_suite(data_path("suites/tiny.json"));
  ExperimentConfig c;
  c.suite_path = data_path("suites/tiny.json");

  c.scorer.kind = "explicit";
  c.scorer.model_path = "";
  CHECK_THROWS_AS(build_contexts(c, suite), ConfigError);

  c.scorer.kind = "volcano";
  CHECK_THROWS_AS(build_contexts(c, suite), ConfigError);

  c.scorer.kind = "oracle";
  c.policy.kind = "file";
  c.policy.path = "";
  CHECK_THROWS_AS(build_contexts(c, suite), ConfigError);

  c.policy.kind = "remote";
  c.policy.endpoint = "";
  CHECK_THROWS_AS(build_contexts(c, suite), ConfigError);

  c.policy.kind = "psychic";
  CHECK_THROWS_AS(build_contexts(c, suite), ConfigError);

  c.policy.kind = "imitation";
  c.policy.smoothing = 0.5;
  std::vector<TaskContext> contexts = build_contexts(c, suite);
  REQUIRE(contexts.size() == suite.size());
  for (const TaskContext& ctx : contexts) {
    CHECK(ctx.env != nullptr);
    CHECK(ctx.policy != nullptr);
    CHECK(ctx.reference != nullptr);
    CHECK(ctx.scorer != nullptr);
  }
}

TEST_CASE("perturbation rules rewrite surfaces while aliases keep the semantics") {
  std::vector<TaskSpec> suite = load_task_suite(data_path("suites/toy.json"));
  const TaskSpec* shop = nullptr;
  for (const TaskSpec& t : suite)
    if (t.task_id == "shop_easy") shop = &t;
  REQUIRE(shop != nullptr);

  SUBCASE("identity changes nothing visible") {
    std::vector<TaskSpec> out = perturb_suite(suite, "identity");
    REQUIRE(out.size() == suite.size());
    for (std::size_t i = 0; i < suite.size(); ++i) {
      std::unique_ptr<Environment> a = make_environment(suite[i]);
      std::unique_ptr<Environment> b = make_environment(out[i]);
      CHECK(a->spec().action_vocabulary == b->spec().action_vocabulary);
    }
  }

  SUBCASE("synonym-swap renames verbs and routes them back to the canonical command") {
    std::vector<TaskSpec> out = perturb_suite({*shop}, "synonym-swap");
    std::unique_ptr<Environment> orig = make_environment(*shop);
    std::unique_ptr<Environment> env = make_environment(out[0]);

    const std::vector<std::string>& vocab = env->spec().action_vocabulary;
    CHECK(std::find(vocab.begin(), vocab.end(), "survey") != vocab.end());
    CHECK(std::find(vocab.begin(), vocab.end(), "purchase m1") != vocab.end());
    CHECK(std::find(vocab.begin(), vocab.end(), "buy m1") == vocab.end());

    // Behavior is untouched: the renamed buy still completes the order with
    // the original observation text.
    TrajectoryState origBuy = orig->step(orig->reset(), {"", "buy m1"});
    TrajectoryState swapBuy = env->step(env->reset(), {"", "purchase m1"});
    CHECK(swapBuy.terminal == origBuy.terminal);
    CHECK(swapBuy.steps.back().observation.text == origBuy.steps.back().observation.text);
    CHECK(env->outcome_reward(swapBuy) == doctest::Approx(orig->outcome_reward(origBuy)));

    // Whole-episode check: the reachable outcome multisets agree.
    std::vector<EpisodeResult> a = enumerate_all_episodes(*orig);
    std::vector<EpisodeResult> b = enumerate_all_episodes(*env);
    REQUIRE(a.size() == b.size());
    std::vector<double> ra, rb;
    for (const EpisodeResult& e : a) ra.push_back(e.outcome_reward);
    for (const EpisodeResult& e : b) rb.push_back(e.outcome_reward);
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    CHECK(ra == rb);
  }

  SUBCASE("argument-reorder rotates the verb to the back and skips one-word commands") {
    TaskSpec grid;
    grid.task_id = "g";
    grid.text = "walk";
    grid.subgoals = {"reach:1,0"};
    grid.max_steps = 2;
    grid.layout = GridLayout{2, 1, {}};
    grid.actions = {"move east", "move west"};
    std::vector<TaskSpec> out = perturb_suite({grid}, "argument-reorder");
    std::unique_ptr<Environment> env = make_environment(out[0]);
    CHECK(env->spec().action_vocabulary ==
          std::vector<std::string>{"east move", "west move"});
    TrajectoryState s = env->step(env->reset(), {"", "east move"});
    CHECK(s.terminal);
    CHECK(env->outcome_reward(s) == doctest::Approx(1.0));

    TaskSpec shop_clone = *shop;
    std::vector<TaskSpec> shop_out = perturb_suite({shop_clone}, "argument-reorder");
    std::unique_ptr<Environment> senv = make_environment(shop_out[0]);
    const std::vector<std::string>& v = senv->spec().action_vocabulary;
    CHECK(std::find(v.begin(), v.end(), "look") != v.end());  // one word, untouched
    CHECK(std::find(v.begin(), v.end(), "m1 buy") != v.end());
  }

  SUBCASE("whitespace-collapse glues words together") {
    std::vector<TaskSpec> out = perturb_suite({*shop}, "whitespace-collapse");
    std::unique_ptr<Environment> env = make_environment(out[0]);
    const std::vector<std::string>& v = env->spec().action_vocabulary;
    CHECK(std::find(v.begin(), v.end(), "buym1") != v.end());
    TrajectoryState s = env->step(env->reset(), {"", "buym1"});
    CHECK(s.terminal);
  }

  SUBCASE("colliding rewrites are refused") {
    TaskSpec grid;
    grid.task_id = "clash";
    grid.text = "walk";
    grid.subgoals = {"reach:1,0"};
    grid.max_steps = 2;
    grid.layout = GridLayout{2, 1, {}};
    grid.actions = {"move east", "moveeast"};
    grid.aliases = {{"moveeast", "move west"}};
    make_environment(grid);  // sanity: the unperturbed spec is valid
    try {
      perturb_suite({grid}, "whitespace-collapse");
      FAIL_CHECK("collision accepted");
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "collides"));
      CHECK(contains(e.what(), "moveeast"));
    }
  }

  SUBCASE("unknown rules are refused") {
    try {
      perturb_suite(suite, "leetspeak");
      FAIL_CHECK("unknown rule accepted");
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "unknown perturbation rule"));
    }
  }

  CHECK(perturbation_rules() ==
        std::vector<std::string>{"identity", "synonym-swap", "argument-reorder",
                                 "whitespace-collapse"});
}

TEST_CASE("perturb command reports zero drift for a surface-blind method") {
  fs::path dir = fresh_dir("perturb");
  ExperimentConfig c = base_config("suites/tiny.json", dir);
  std::vector<std::string> rules = {"identity", "whitespace-collapse"};

  // Greedy decoding only sees vocabulary indices, so every alias-preserving
  // rewrite must leave the score exactly where it was.
  PerturbReport report = cmd_perturb(c, rules, "greedy");
  CHECK(report.method == "greedy");
  CHECK(report.rules == rules);
  REQUIRE(report.rule_means.size() == 2);

  EvaluationReport direct = cmd_eval(c, "greedy", /*write_outputs=*/false);
  CHECK(report.original_mean == doctest::Approx(direct.suite_mean).epsilon(1e-12));
  CHECK(report.rule_means[0] == doctest::Approx(report.original_mean).epsilon(1e-12));
  CHECK(report.rule_means[1] == doctest::Approx(report.original_mean).epsilon(1e-12));

  // average/stddev cover the original column plus one column per rule
  double mean = (report.original_mean + report.rule_means[0] + report.rule_means[1]) / 3.0;
  CHECK(report.average == doctest::Approx(mean).epsilon(1e-12));
  CHECK(report.stddev == doctest::Approx(0.0));

  CHECK(fs::exists(dir / "suites" / "identity.json"));
  CHECK(fs::exists(dir / "suites" / "whitespace-collapse.json"));
  CHECK(fs::exists(dir / "perturb_report.json"));
  CHECK(fs::exists(dir / "perturb_report.txt"));
  CHECK(fs::exists(dir / "config.json"));

  // The written perturbed suites load and validate on their own.
  std::vector<TaskSpec> written =
      load_task_suite((dir / "suites" / "whitespace-collapse.json").string());
  CHECK(written.size() == 3);
  for (const TaskSpec& t : written) make_environment(t);

  json j = json::parse(slurp((dir / "perturb_report.json").string()));
  CHECK(j.at("method") == "greedy");
  CHECK(j.at("rules").size() == 2);
  CHECK(j.at("rules")[0].at("rule") == "identity");
  CHECK(j.at("rules")[0].at("delta").get<double>() == doctest::Approx(0.0));
  CHECK_FALSE(j.contains("wall_seconds"));

  std::string txt = slurp((dir / "perturb_report.txt").string());
  CHECK(contains(txt, "original"));
  CHECK(contains(txt, "whitespace-collapse"));
  CHECK(contains(txt, "method greedy"));

  CHECK_THROWS_AS(cmd_perturb(c, {}, "greedy"), ConfigError);
  CHECK_THROWS_AS(cmd_perturb(c, {"leetspeak"}, "greedy"), ConfigError);
}

TEST_CASE("preference accuracy is perfect for the oracle and undefined past the spread") {
  fs::path dir = fresh_dir("pref_acc");
  ExperimentConfig c = base_config("suites/tiny.json", dir);

  PrefAccReport report = cmd_pref_acc(c, 0.3);
  CHECK(report.defined);
  CHECK(report.pairs > 0);
  CHECK(report.correct == report.pairs);
  CHECK(report.accuracy == doctest::Approx(1.0));

  // states counts every enumerated terminal outcome across the suite
  std::size_t expected_states = 0;
  for (const TaskSpec& t : load_task_suite(c.suite_path)) {
    std::unique_ptr<Environment> env = make_environment(t);
    expected_states += enumerate_all_episodes(*env).size();
  }
  CHECK(report.states == expected_states);

  json j = json::parse(slurp((dir / "pref_acc.json").string()));
  CHECK(j.at("accuracy").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("pairs").get<std::size_t>() == report.pairs);
  CHECK(j.at("threshold").get<double>() == doctest::Approx(0.3));

  SUBCASE("a threshold above the score range leaves accuracy undefined") {
    PrefAccReport none = cmd_pref_acc(c, 1.1, /*write_outputs=*/false);
    CHECK_FALSE(none.defined);
    CHECK(none.pairs == 0);
    CHECK(none.to_json().at("accuracy").is_null());
  }

  SUBCASE("the judge cannot provide pairwise scores") {
    ExperimentConfig judged = c;
    judged.scorer.kind = "judge";
    try {
      cmd_pref_acc(judged, 0.3, false);
      FAIL_CHECK("judge accepted for pref-acc");
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "preference accuracy needs a scorer"));
    }
  }
}
