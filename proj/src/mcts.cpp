#include "rgs/mcts.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rgs/errors.hpp"

namespace rgs {

using json = nlohmann::json;

double ucb_score(const SearchNode& parent, const SearchNode& child, double exploration_c) {
  return child.value +
         exploration_c * std::sqrt(std::log(static_cast<double>(parent.visit_count)) /
                                   (1.0 + static_cast<double>(child.visit_count)));
}

std::vector<int> select_path(const SearchTree& tree) {
  std::vector<int> path{0};
  int cur = 0;
  while (tree.at(cur).expanded && !tree.at(cur).children.empty()) {
    const SearchNode& node = tree.at(cur);
    int best = node.children.front();
    double best_score = ucb_score(node, tree.at(best), tree.config.exploration_c);
    for (std::size_t i = 1; i < node.children.size(); ++i) {
      int c = node.children[i];
      double s = ucb_score(node, tree.at(c), tree.config.exploration_c);
      if (s > best_score) {  // ties keep the earliest child
        best = c;
        best_score = s;
      }
    }
    path.push_back(best);
    cur = best;
  }
  return path;
}

static int find_child_by_command(const SearchTree& tree, int node, const std::string& command) {
  for (int c : tree.at(node).children)
    if (!tree.at(c).state.steps.empty() &&
        tree.at(c).state.steps.back().action.command == command)
      return c;
  return -1;
}

static int attach_child(SearchTree& tree, int parent, TrajectoryState state) {
  SearchNode child;
  child.terminal = state.terminal;
  child.state = std::move(state);
  child.parent = parent;
  tree.nodes.push_back(std::move(child));
  int idx = static_cast<int>(tree.nodes.size()) - 1;
  tree.nodes[static_cast<std::size_t>(parent)].children.push_back(idx);
  return idx;
}

Expansion expand(SearchTree& tree, int node, const Environment& env, const Policy& policy,
                 const SearchConfig& config, Rng& rng) {
  Expansion out;
  if (tree.at(node).terminal) return out;  // no-expansion signal

  PolicyConfig pc;
  pc.temperature = config.temperature;
  pc.sample_width_k = config.expansion_width;
  std::vector<ActionSample> samples = policy.sample_actions(tree.at(node).state, pc, rng);

  for (const ActionSample& s : samples) {
    bool dup = false;
    for (int c : out.children)
      if (tree.at(c).state.steps.back().action.command == s.action.command) dup = true;
    if (dup) continue;  // merged: the first sample's thought wins

    int existing = find_child_by_command(tree, node, s.action.command);
    if (existing >= 0) {
      out.children.push_back(existing);
      out.preexisting.push_back(true);
      continue;
    }
    TrajectoryState next = env.step(tree.at(node).state, s.action);
    out.children.push_back(attach_child(tree, node, std::move(next)));
    out.preexisting.push_back(false);
  }
  tree.nodes[static_cast<std::size_t>(node)].expanded = true;
  return out;
}

// Inserts one rollout below `start` as a chain of unexpanded nodes, merging
// with existing children command by command. Each node on the chain absorbs
// the episode reward into its running mean; the terminal chain node also gets
// the direct-simulation credit.
static void materialize_rollout(SearchTree& tree, int start, const EpisodeResult& episode) {
  int cur = start;
  std::size_t from = tree.at(start).state.steps.size();
  for (std::size_t i = from; i < episode.final_state.steps.size(); ++i) {
    const StepRecord& step = episode.final_state.steps[i];
    int child = find_child_by_command(tree, cur, step.action.command);
    if (child < 0) {
      TrajectoryState s = tree.at(cur).state;
      s.steps.push_back(step);
      s.terminal = episode.final_state.terminal && i + 1 == episode.final_state.steps.size();
      child = attach_child(tree, cur, std::move(s));
    }
    SearchNode& n = tree.nodes[static_cast<std::size_t>(child)];
    n.value = (n.value * n.visit_count + episode.outcome_reward) / (n.visit_count + 1);
    n.visit_count += 1;
    cur = child;
  }
  tree.nodes[static_cast<std::size_t>(cur)].direct_simulations += 1;
}

std::vector<double> simulate(SearchTree& tree, int node, const Environment& env,
                             const Policy& policy, const SearchConfig& config, bool preexisting,
                             Rng& rng) {
  SearchNode& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.terminal) {
    double v = env.outcome_reward(n.state);
    n.value = (n.value * n.visit_count + v) / (n.visit_count + 1);
    n.visit_count += 1;
    n.direct_simulations += 1;
    return {v};
  }
  // A merged child under a deterministic greedy rollout would reproduce its
  // cached trajectory exactly, so the cached value is reused as one virtual
  // simulation credited directly to the child.
  if (preexisting && config.rollout_mode == RolloutKind::greedy && env.spec().deterministic &&
      n.visit_count >= 1) {
    double v = n.value;
    n.visit_count += 1;
    n.direct_simulations += 1;
    return {v};
  }
  std::vector<double> values;
  for (int i = 0; i < config.simulations; ++i) {
    EpisodeResult ep =
        rollout(policy, env, tree.at(node).state, config.rollout_mode, config.temperature, rng);
    materialize_rollout(tree, node, ep);
    SearchNode& nn = tree.nodes[static_cast<std::size_t>(node)];
    nn.value = (nn.value * nn.visit_count + ep.outcome_reward) / (nn.visit_count + 1);
    nn.visit_count += 1;
    nn.cached_rollout = ep;
    values.push_back(ep.outcome_reward);
  }
  return values;
}

void backpropagate(SearchTree& tree, const std::vector<int>& path,
                   const std::vector<double>& values) {
  if (values.empty()) return;
  double sum = 0.0;
  for (double v : values) sum += v;
  int k = static_cast<int>(values.size());
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    SearchNode& n = tree.nodes[static_cast<std::size_t>(*it)];
    n.value = (n.value * n.visit_count + sum) / (n.visit_count + k);
    n.visit_count += k;
  }
}

SearchTree build_tree(const Environment& env, const Policy& policy, const SearchConfig& config,
                      const IterationCallback& on_iteration) {
  if (config.iterations < 0) throw ConfigError("iterations must be >= 0");
  if (config.expansion_width < 1) throw ConfigError("expansion_width must be >= 1");
  if (config.simulations < 1) throw ConfigError("simulations must be >= 1");

  SearchTree tree;
  tree.instruction = env.instruction();
  tree.config = config;
  Rng rng(config.seed);

  SearchNode root;
  root.state = env.reset();
  root.terminal = root.state.terminal;
  tree.nodes.push_back(std::move(root));
  if (tree.root().terminal) {  // degenerate single-node tree
    tree.root().value = env.outcome_reward(tree.root().state);
    tree.root().visit_count = 1;
    tree.root().direct_simulations = 1;
    return tree;
  }

  for (int it = 0; it < config.iterations; ++it) {
    std::vector<int> path = select_path(tree);
    int leaf = path.back();
    if (tree.at(leaf).terminal) {
      // Re-simulating a terminal leaf: its exact reward, backpropagated as a
      // single value (k-hat = 1).
      double v = env.outcome_reward(tree.at(leaf).state);
      tree.nodes[static_cast<std::size_t>(leaf)].direct_simulations += 1;
      backpropagate(tree, path, {v});
    } else {
      Expansion ex = expand(tree, leaf, env, policy, config, rng);
      std::vector<double> values;
      for (std::size_t i = 0; i < ex.children.size(); ++i) {
        std::vector<double> vs =
            simulate(tree, ex.children[i], env, policy, config, ex.preexisting[i], rng);
        values.insert(values.end(), vs.begin(), vs.end());
      }
      backpropagate(tree, path, values);
    }
    if (on_iteration) on_iteration(tree, it);
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Serialization. Nested layout; states are reconstructed from the stored
// (command, thought, observation) path, so loading needs no environment.

static json node_to_json(const SearchTree& tree, int idx) {
  const SearchNode& n = tree.at(idx);
  json j;
  if (idx != 0) {
    const StepRecord& last = n.state.steps.back();
    j["command"] = last.action.command;
    j["thought"] = last.action.thought;
    j["observation"] = last.observation.text;
  }
  j["n"] = n.visit_count;
  j["v"] = n.value;
  j["terminal"] = n.terminal;
  j["expanded"] = n.expanded;
  j["sims"] = n.direct_simulations;
  json kids = json::array();
  for (int c : n.children) kids.push_back(node_to_json(tree, c));
  j["children"] = kids;
  return j;
}

static void node_from_json(SearchTree& tree, const json& j, int parent) {
  SearchNode node;
  if (parent < 0) {
    node.state.instruction = tree.instruction;
  } else {
    node.state = tree.at(parent).state;
    node.state.steps.push_back(
        {{j.at("thought").get<std::string>(), j.at("command").get<std::string>()},
         {j.at("observation").get<std::string>()}});
  }
  node.state.terminal = j.at("terminal").get<bool>();
  node.terminal = node.state.terminal;
  node.visit_count = j.at("n").get<int>();
  node.value = j.at("v").get<double>();
  node.expanded = j.at("expanded").get<bool>();
  node.direct_simulations = j.at("sims").get<int>();
  node.parent = parent;
  tree.nodes.push_back(std::move(node));
  int idx = static_cast<int>(tree.nodes.size()) - 1;
  if (parent >= 0) tree.nodes[static_cast<std::size_t>(parent)].children.push_back(idx);
  for (const auto& cj : j.at("children")) node_from_json(tree, cj, idx);
}

static json config_to_json(const SearchConfig& c) {
  json j;
  j["iterations"] = c.iterations;
  j["exploration_c"] = c.exploration_c;
  j["expansion_width"] = c.expansion_width;
  j["simulations"] = c.simulations;
  j["rollout_mode"] = c.rollout_mode == RolloutKind::greedy ? "greedy" : "sampled";
  j["temperature"] = c.temperature;
  j["seed"] = c.seed;
  return j;
}

static SearchConfig config_from_json(const json& j) {
  SearchConfig c;
  c.iterations = j.at("iterations").get<int>();
  c.exploration_c = j.at("exploration_c").get<double>();
  c.expansion_width = j.at("expansion_width").get<int>();
  c.simulations = j.at("simulations").get<int>();
  c.rollout_mode =
      j.at("rollout_mode").get<std::string>() == "greedy" ? RolloutKind::greedy : RolloutKind::sampled;
  c.temperature = j.at("temperature").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string tree_to_json(const SearchTree& tree) {
  json j;
  j["schema"] = "search_tree.v1";
  j["task_id"] = tree.instruction.task_id;
  j["task_text"] = tree.instruction.text;
  j["initial_observation"] = tree.root().state.initial_observation.text;
  j["config"] = config_to_json(tree.config);
  j["root"] = node_to_json(tree, 0);
  return j.dump(2) + "\n";
}

SearchTree tree_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("tree parse: ") + e.what());
  }
  if (j.value("schema", "") != "search_tree.v1") throw ConfigError("tree: unknown schema");
  SearchTree tree;
  tree.instruction = {j.at("task_id").get<std::string>(), j.at("task_text").get<std::string>()};
  tree.config = config_from_json(j.at("config"));
  node_from_json(tree, j.at("root"), -1);
  tree.root().state.initial_observation = {j.at("initial_observation").get<std::string>()};
  // children were appended after the root state was copied, so re-derive the
  // initial observation for every node
  for (auto& n : tree.nodes) n.state.initial_observation = tree.root().state.initial_observation;
  return tree;
}

void save_tree(const std::string& path, const SearchTree& tree) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write tree file: " + path);
  out << tree_to_json(tree);
}

SearchTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tree file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return tree_from_json(text);
}

}  // namespace rgs
