#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rgs/env.hpp"
#include "rgs/errors.hpp"
#include "rgs/mcts.hpp"
#include "rgs/policy.hpp"

using namespace rgs;

namespace {

std::string data_path(const std::string& rel) {
  return std::string(RGS_DATA_DIR) + "/" + rel;
}

const std::vector<TaskSpec>& toy_suite() {
  static std::vector<TaskSpec> suite = load_task_suite(data_path("suites/toy.json"));
  return suite;
}

const std::vector<TaskSpec>& tiny_suite() {
  static std::vector<TaskSpec> suite = load_task_suite(data_path("suites/tiny.json"));
  return suite;
}

SearchNode stats_node(double value, int visits) {
  SearchNode n;
  n.value = value;
  n.visit_count = visits;
  return n;
}

// A tree whose only contents are hand-assigned statistics, for exercising
// selection and backpropagation in isolation.
SearchTree bare_tree(double exploration_c) {
  SearchTree tree;
  tree.config.exploration_c = exploration_c;
  tree.nodes.push_back(SearchNode{});
  return tree;
}

int add_bare_child(SearchTree& tree, int parent, double value, int visits) {
  SearchNode child = stats_node(value, visits);
  child.parent = parent;
  tree.nodes.push_back(child);
  int idx = static_cast<int>(tree.nodes.size()) - 1;
  tree.nodes[static_cast<std::size_t>(parent)].children.push_back(idx);
  return idx;
}

const SearchNode* child_by_command(const SearchTree& tree, int node, const std::string& cmd) {
  for (int c : tree.at(node).children)
    if (tree.at(c).state.steps.back().action.command == cmd) return &tree.at(c);
  return nullptr;
}

void check_visit_conservation(const SearchTree& tree) {
  for (const auto& n : tree.nodes) {
    int from_children = 0;
    for (int c : n.children) from_children += tree.at(c).visit_count;
    CHECK(n.visit_count == from_children + n.direct_simulations);
  }
}

}  // namespace

TEST_CASE("ucb matches hand-computed reference values") {
  // V + c * sqrt(ln N_parent / (1 + N_child)), natural log, no infinity bonus.
  SearchNode parent = stats_node(0.0, 10);
  SearchNode child = stats_node(0.6, 3);
  CHECK(ucb_score(parent, child, 0.5) == doctest::Approx(0.9793567823).epsilon(1e-9));

  parent = stats_node(0.0, 5);
  child = stats_node(0.5, 1);
  CHECK(ucb_score(parent, child, 0.5) == doctest::Approx(0.9485306445).epsilon(1e-9));

  // An unvisited child under a single-visit parent: ln(1) = 0, so the bonus
  // vanishes instead of being infinite.
  parent = stats_node(0.0, 1);
  child = stats_node(0.0, 0);
  CHECK(ucb_score(parent, child, 2.0) == doctest::Approx(0.0));
}

TEST_CASE("selection with c=0 is greedy on value") {
  SearchTree tree = bare_tree(0.0);
  tree.root().expanded = true;
  tree.root().visit_count = 30;
  add_bare_child(tree, 0, 0.2, 25);
  int best = add_bare_child(tree, 0, 0.9, 1);
  add_bare_child(tree, 0, 0.5, 4);
  auto path = select_path(tree);
  REQUIRE(path.size() == 2);
  CHECK(path[1] == best);
}

TEST_CASE("a large exploration constant prefers the unvisited child") {
  SearchTree tree = bare_tree(10.0);
  tree.root().expanded = true;
  tree.root().visit_count = 3;
  add_bare_child(tree, 0, 1.0, 2);
  int fresh = add_bare_child(tree, 0, 0.0, 0);
  auto path = select_path(tree);
  REQUIRE(path.size() == 2);
  CHECK(path[1] == fresh);
}

TEST_CASE("selection ties resolve toward the lowest child index") {
  SearchTree tree = bare_tree(0.5);
  tree.root().expanded = true;
  tree.root().visit_count = 4;
  int first = add_bare_child(tree, 0, 0.5, 2);
  add_bare_child(tree, 0, 0.5, 2);
  auto path = select_path(tree);
  REQUIRE(path.size() == 2);
  CHECK(path[1] == first);
}

TEST_CASE("selection descends only expanded nodes") {
  SearchTree tree = bare_tree(0.5);
  tree.root().expanded = true;
  tree.root().visit_count = 6;
  int a = add_bare_child(tree, 0, 0.9, 4);
  add_bare_child(tree, 0, 0.1, 2);
  tree.nodes[static_cast<std::size_t>(a)].expanded = true;
  int g = add_bare_child(tree, a, 0.9, 3);
  // g is unexpanded: the path must stop there even though it has statistics.
  auto path = select_path(tree);
  REQUIRE(path.size() == 3);
  CHECK(path[1] == a);
  CHECK(path[2] == g);
}

TEST_CASE("backpropagation applies the running-mean update") {
  SearchTree tree = bare_tree(0.5);
  tree.root().value = 0.4;
  tree.root().visit_count = 2;
  backpropagate(tree, {0}, {0.8, 0.6});
  CHECK(tree.root().value == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(tree.root().visit_count == 4);
}

TEST_CASE("backpropagation into a zero-visit node is a plain mean") {
  SearchTree tree = bare_tree(0.5);
  backpropagate(tree, {0}, {0.7});
  CHECK(tree.root().value == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(tree.root().visit_count == 1);
  // An empty value list changes nothing.
  backpropagate(tree, {0}, {});
  CHECK(tree.root().visit_count == 1);
}

TEST_CASE("iterated backpropagation equals the direct mean of all outcomes") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    SearchTree tree = bare_tree(0.5);
    std::vector<double> all;
    int batches = 1 + static_cast<int>(rng() % 6);
    for (int b = 0; b < batches; ++b) {
      std::vector<double> batch;
      int k = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < k; ++i) {
        double v = uniform01(rng);
        batch.push_back(v);
        all.push_back(v);
      }
      backpropagate(tree, {0}, batch);
    }
    double mean = 0.0;
    for (double v : all) mean += v;
    mean /= static_cast<double>(all.size());
    CHECK(tree.root().visit_count == static_cast<int>(all.size()));
    CHECK(tree.root().value == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("backpropagation updates every node on the path") {
  SearchTree tree = bare_tree(0.5);
  int a = add_bare_child(tree, 0, 0.0, 0);
  int g = add_bare_child(tree, a, 0.0, 0);
  backpropagate(tree, {0, a, g}, {1.0, 0.0});
  for (int idx : {0, a, g}) {
    CHECK(tree.at(idx).visit_count == 2);
    CHECK(tree.at(idx).value == doctest::Approx(0.5));
  }
}

TEST_CASE("expansion merges duplicate commands into one child") {
  auto env = make_environment(find_task(tiny_suite(), "tiny_span"));
  // A point-mass policy: every sample is "move east", so five samples
  // collapse to a single child.
  EpisodeResult expert = expert_episode(*env);
  TabularPolicy policy = imitation_fit({expert}, env->spec().action_vocabulary, 0.0);

  SearchTree tree;
  tree.instruction = env->instruction();
  tree.config.expansion_width = 5;
  SearchNode root;
  root.state = env->reset();
  tree.nodes.push_back(root);

  Rng rng(1);
  Expansion ex = expand(tree, 0, *env, policy, tree.config, rng);
  REQUIRE(ex.children.size() == 1);
  CHECK_FALSE(ex.preexisting[0]);
  CHECK(tree.root().expanded);
  const SearchNode& child = tree.at(ex.children[0]);
  CHECK(child.state.steps.back().action.command == "move east");
  // The merged child is exactly what stepping the environment produces.
  TrajectoryState direct = env->step(tree.root().state, child.state.steps.back().action);
  CHECK(state_key(direct) == state_key(child.state));
  CHECK(direct.terminal == child.terminal);
}

TEST_CASE("re-expanding a node reuses existing children") {
  auto env = make_environment(find_task(toy_suite(), "grid_key_east"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);

  SearchTree tree;
  tree.instruction = env->instruction();
  tree.config.expansion_width = 12;  // enough to cover all four moves
  SearchNode root;
  root.state = env->reset();
  tree.nodes.push_back(root);

  Rng rng(5);
  Expansion first = expand(tree, 0, *env, policy, tree.config, rng);
  std::size_t nodes_after_first = tree.nodes.size();
  Expansion second = expand(tree, 0, *env, policy, tree.config, rng);

  // Any command sampled again maps onto the same arena index.
  std::set<int> first_set(first.children.begin(), first.children.end());
  for (std::size_t i = 0; i < second.children.size(); ++i) {
    if (second.preexisting[i]) CHECK(first_set.count(second.children[i]) == 1);
  }
  // No duplicate commands among the node's children.
  std::set<std::string> commands;
  for (int c : tree.root().children)
    CHECK(commands.insert(tree.at(c).state.steps.back().action.command).second);
  CHECK(tree.nodes.size() >= nodes_after_first);
}

TEST_CASE("expanding a terminal node yields the no-expansion signal") {
  auto env = make_environment(find_task(toy_suite(), "shop_easy"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);

  SearchTree tree;
  tree.instruction = env->instruction();
  SearchNode root;
  root.state = env->step(env->reset(), {"", "buy m1"});
  root.terminal = true;
  tree.nodes.push_back(root);

  Rng rng(1);
  Expansion ex = expand(tree, 0, *env, policy, tree.config, rng);
  CHECK(ex.children.empty());
  CHECK_FALSE(tree.root().expanded);
}

TEST_CASE("simulating a terminal child records its exact reward") {
  auto env = make_environment(find_task(toy_suite(), "shop_easy"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);

  SearchTree tree;
  tree.instruction = env->instruction();
  SearchNode root;
  root.state = env->reset();
  tree.nodes.push_back(root);
  SearchNode child;
  child.state = env->step(tree.root().state, {"", "buy m3"});
  child.terminal = true;
  child.parent = 0;
  tree.nodes.push_back(child);
  tree.root().children.push_back(1);

  Rng rng(1);
  auto values = simulate(tree, 1, *env, policy, tree.config, false, rng);
  REQUIRE(values.size() == 1);
  CHECK(values[0] == doctest::Approx(env->outcome_reward(tree.at(1).state)));
  CHECK(tree.at(1).visit_count == 1);
  CHECK(tree.at(1).direct_simulations == 1);
  CHECK(tree.at(1).value == doctest::Approx(values[0]));
}

TEST_CASE("simulation materializes rollouts and averages their returns") {
  auto env = make_environment(find_task(tiny_suite(), "tiny_span"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);

  SearchTree tree;
  tree.instruction = env->instruction();
  tree.config.simulations = 4;
  tree.config.rollout_mode = RolloutKind::sampled;
  SearchNode root;
  root.state = env->reset();
  tree.nodes.push_back(root);
  SearchNode child;
  child.state = env->step(tree.root().state, {"", "move east"});
  child.parent = 0;
  tree.nodes.push_back(child);
  tree.root().children.push_back(1);

  Rng rng(77);
  auto values = simulate(tree, 1, *env, policy, tree.config, false, rng);
  REQUIRE(values.size() == 4);
  double mean = 0.0;
  for (double v : values) {
    CHECK((v == 0.0 || v == 1.0));
    mean += v;
  }
  mean /= 4.0;
  CHECK(tree.at(1).visit_count == 4);
  CHECK(tree.at(1).value == doctest::Approx(mean).epsilon(1e-12));
  // The rollout trajectories live below the child as an unexpanded chain.
  CHECK_FALSE(tree.at(1).children.empty());
  CHECK(tree.at(1).cached_rollout.has_value());
  // The conservation invariant holds once the iteration's backpropagation
  // lands the simulated values on the path above the child.
  backpropagate(tree, {0}, values);
  check_visit_conservation(tree);
}

TEST_CASE("a merged child under deterministic greedy rollouts reuses its cache") {
  auto env = make_environment(find_task(tiny_suite(), "tiny_span"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);

  SearchTree tree;
  tree.instruction = env->instruction();
  tree.config.rollout_mode = RolloutKind::greedy;
  SearchNode root;
  root.state = env->reset();
  tree.nodes.push_back(root);
  SearchNode child;
  child.state = env->step(tree.root().state, {"", "move east"});
  child.parent = 0;
  tree.nodes.push_back(child);
  tree.root().children.push_back(1);

  Rng rng(3);
  auto first = simulate(tree, 1, *env, policy, tree.config, false, rng);
  REQUIRE(first.size() == 1);
  std::size_t node_count = tree.nodes.size();
  int direct_before = tree.at(1).direct_simulations;

  auto again = simulate(tree, 1, *env, policy, tree.config, true, rng);
  REQUIRE(again.size() == 1);
  CHECK(again[0] == doctest::Approx(first[0]));
  CHECK(tree.nodes.size() == node_count);  // no fresh rollout materialized
  CHECK(tree.at(1).visit_count == 2);
  CHECK(tree.at(1).direct_simulations == direct_before + 1);
}

TEST_CASE("one iteration gives the root exactly one visit per distinct child value") {
  auto env = make_environment(find_task(toy_suite(), "grid_key_east"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = 1;
  config.expansion_width = 5;
  config.simulations = 1;
  config.seed = 9;
  SearchTree tree = build_tree(*env, policy, config);
  CHECK(tree.root().expanded);
  CHECK(tree.root().visit_count == static_cast<int>(tree.root().children.size()));
  check_visit_conservation(tree);
}

TEST_CASE("visit counts decompose into children plus direct simulations at every iteration") {
  Rng meta(12345);
  const char* ids[] = {"grid_key_east", "grid_two_keys", "shop_easy", "shop_picky"};
  for (int trial = 0; trial < 100; ++trial) {
    const char* id = ids[meta() % 4];
    auto env = make_environment(find_task(toy_suite(), id));
    TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
    SearchConfig config;
    config.iterations = 1 + static_cast<int>(meta() % 25);
    config.expansion_width = 1 + static_cast<int>(meta() % 6);
    config.simulations = 1 + static_cast<int>(meta() % 3);
    config.rollout_mode = (meta() % 2) ? RolloutKind::sampled : RolloutKind::greedy;
    config.exploration_c = uniform01(meta) * 2.0;
    config.temperature = 0.5 + uniform01(meta);
    config.seed = meta();
    int fired = 0;
    build_tree(*env, policy, config, [&](const SearchTree& t, int) {
      check_visit_conservation(t);
      ++fired;
    });
    CHECK(fired == config.iterations);
  }
}

TEST_CASE("every tree node is a faithful environment transition") {
  auto env = make_environment(find_task(toy_suite(), "grid_two_keys"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = 60;
  config.rollout_mode = RolloutKind::sampled;
  config.seed = 21;
  SearchTree tree = build_tree(*env, policy, config);
  REQUIRE(tree.nodes.size() > 10);
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const SearchNode& n = tree.nodes[i];
    const SearchNode& p = tree.at(n.parent);
    REQUIRE(n.state.depth() == p.state.depth() + 1);
    TrajectoryState direct = env->step(p.state, n.state.steps.back().action);
    CHECK(direct.steps.back().observation.text == n.state.steps.back().observation.text);
    CHECK(direct.terminal == n.terminal);
    CHECK(n.state.depth() <= env->spec().max_steps);
    CHECK(n.value >= 0.0);
    CHECK(n.value <= 1.0);
  }
}

TEST_CASE("search converges to the greedy-return oracle on a corridor") {
  // tiny_span: "move east" from the root leads to reward 1 under greedy
  // continuation; "move west" wastes a step and caps at reward 0. The east
  // child's value should approach 1 (diluted only by its explored bad
  // grandchildren) and the west child's exactly 0.
  auto env = make_environment(find_task(tiny_suite(), "tiny_span"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = 200;
  config.seed = 4;
  SearchTree tree = build_tree(*env, policy, config);

  const SearchNode* east = child_by_command(tree, 0, "move east");
  const SearchNode* west = child_by_command(tree, 0, "move west");
  REQUIRE(east != nullptr);
  REQUIRE(west != nullptr);
  CHECK(east->value == doctest::Approx(1.0).epsilon(0.05));
  CHECK(west->value == doctest::Approx(0.0));
  CHECK(east->visit_count > west->visit_count);
  check_visit_conservation(tree);
}

TEST_CASE("search trees are reproducible from the seed") {
  auto env = make_environment(find_task(toy_suite(), "grid_detour"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = 40;
  config.rollout_mode = RolloutKind::sampled;
  config.seed = 31;
  SearchTree a = build_tree(*env, policy, config);
  SearchTree b = build_tree(*env, policy, config);
  CHECK(tree_to_json(a) == tree_to_json(b));

  config.seed = 32;
  SearchTree c = build_tree(*env, policy, config);
  CHECK(tree_to_json(a) != tree_to_json(c));
}

TEST_CASE("a goal satisfied at the start still requires one step to bank") {
  TaskSpec t;
  t.task_id = "instant";
  t.text = "already there";
  t.max_steps = 1;
  t.subgoals = {"reach:0,0"};
  GridLayout g;
  g.width = 1;
  g.height = 1;
  t.layout = g;
  auto env = make_environment(t);
  // reset() is non-terminal by contract, so search always has work to do.
  REQUIRE_FALSE(env->reset().terminal);
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = 10;
  SearchTree tree = build_tree(*env, policy, config);
  CHECK(tree.root().expanded);
  REQUIRE_FALSE(tree.root().children.empty());
  for (int c : tree.root().children) {
    CHECK(tree.at(c).terminal);
    CHECK(tree.at(c).value == doctest::Approx(1.0));
  }
  CHECK(tree.root().value == doctest::Approx(1.0));
  check_visit_conservation(tree);
}

TEST_CASE("build_tree validates its configuration") {
  auto env = make_environment(find_task(toy_suite(), "grid_key_east"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = -1;
  CHECK_THROWS_AS(build_tree(*env, policy, config), ConfigError);
  config.iterations = 1;
  config.expansion_width = 0;
  CHECK_THROWS_AS(build_tree(*env, policy, config), ConfigError);
  config.expansion_width = 5;
  config.simulations = 0;
  CHECK_THROWS_AS(build_tree(*env, policy, config), ConfigError);
}

TEST_CASE("trees survive a byte-stable json round trip") {
  auto env = make_environment(find_task(toy_suite(), "grid_two_keys"));
  TabularPolicy policy = TabularPolicy::uniform(env->spec().action_vocabulary);
  SearchConfig config;
  config.iterations = 30;
  config.rollout_mode = RolloutKind::sampled;
  config.temperature = 0.8;
  config.seed = 17;
  SearchTree tree = build_tree(*env, policy, config);

  std::string text = tree_to_json(tree);
  SearchTree back = tree_from_json(text);
  CHECK(back.nodes.size() == tree.nodes.size());
  CHECK(tree_to_json(back) == text);
  CHECK(back.instruction.task_id == tree.instruction.task_id);
  CHECK(back.config.temperature == doctest::Approx(0.8));
  CHECK(back.config.seed == 17);
  // Reconstructed states carry the full history.
  CHECK(state_key(back.root().state) == state_key(tree.root().state));
  check_visit_conservation(back);

  std::string path = "tree_round_trip.json";
  save_tree(path, tree);
  SearchTree loaded = load_tree(path);
  std::remove(path.c_str());
  CHECK(tree_to_json(loaded) == text);

  CHECK_THROWS_AS(tree_from_json("{\"schema\":\"other.v1\"}"), ConfigError);
  CHECK_THROWS_AS(tree_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(load_tree("no/such/file.json"), ConfigError);
}
