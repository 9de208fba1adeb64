#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgs/env.hpp"
#include "rgs/policy.hpp"
#include "rgs/types.hpp"

namespace rgs {

struct SearchConfig {
  int iterations = 40;
  double exploration_c = 0.5;
  int expansion_width = 5;  // k policy samples per expansion
  int simulations = 1;      // n rollouts per fresh child
  RolloutKind rollout_mode = RolloutKind::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Arena node. `value` is the running mean of every simulation outcome that
/// was backpropagated through this node; `visit_count` is the number of such
/// outcomes. `direct_simulations` counts terminal evaluations attributed to
/// this node itself, so for every node
///   visit_count == sum(children visit_count) + direct_simulations
/// holds after each search iteration. Rollouts are materialized as chains of
/// unexpanded nodes below the simulated child; Selection descends only through
/// `expanded` nodes, and Expansion merges its sampled commands into any cached
/// children it finds.
struct SearchNode {
  TrajectoryState state;
  int visit_count = 0;
  double value = 0.0;
  bool terminal = false;
  bool expanded = false;
  int direct_simulations = 0;
  int parent = -1;
  std::vector<int> children;
  std::optional<EpisodeResult> cached_rollout;  // most recent rollout launched here
};

struct SearchTree {
  Instruction instruction;
  SearchConfig config;
  std::vector<SearchNode> nodes;  // nodes[0] is the root

  SearchNode& root() { return nodes.front(); }
  const SearchNode& root() const { return nodes.front(); }
  const SearchNode& at(int i) const { return nodes[static_cast<std::size_t>(i)]; }
};

/// UCB term for one child: V(child) + c * sqrt(ln N(parent) / (1 + N(child))).
/// Natural log; no infinity bonus for unvisited children.
double ucb_score(const SearchNode& parent, const SearchNode& child, double exploration_c);

/// Root-to-leaf path, descending through expanded nodes by UCB argmax (ties
/// resolved toward the lowest child index). Stops at the first unexpanded or
/// terminal node.
std::vector<int> select_path(const SearchTree& tree);

struct Expansion {
  std::vector<int> children;        // arena indices, one per distinct command
  std::vector<bool> preexisting;    // true when merged into a cached child
};

/// Draws k samples at the configured temperature, merges identical commands
/// (keeping the first sample's thought) and any existing children with the
/// same command, steps the environment once per genuinely new command, and
/// attaches fresh children with zero statistics. Marks the node expanded.
/// Terminal nodes yield an empty expansion (the no-expansion signal).
Expansion expand(SearchTree& tree, int node, const Environment& env, const Policy& policy,
                 const SearchConfig& config, Rng& rng);

/// Simulation values for one expanded child: the child's exact outcome reward
/// when terminal, the cached value when the child was merged and the rollout
/// is deterministic (greedy mode, deterministic env), otherwise `simulations`
/// fresh rollouts whose trajectories are materialized as cached chains.
/// Updates the child's statistics; returns one value per simulation.
std::vector<double> simulate(SearchTree& tree, int node, const Environment& env,
                             const Policy& policy, const SearchConfig& config, bool preexisting,
                             Rng& rng);

/// Applies V <- (V*N + sum(values)) / (N + |values|), N <- N + |values| to
/// every node on the path, bottom-up. With the default single simulation per
/// child the value list is exactly the k-hat expanded children's values.
void backpropagate(SearchTree& tree, const std::vector<int>& path,
                   const std::vector<double>& values);

using IterationCallback = std::function<void(const SearchTree&, int iteration)>;

/// Runs `iterations` select/expand/simulate/backpropagate cycles from the
/// task's initial state. Re-selecting a terminal leaf re-simulates its exact
/// reward and backpropagates a single value. Fully deterministic given the
/// seed.
SearchTree build_tree(const Environment& env, const Policy& policy, const SearchConfig& config,
                      const IterationCallback& on_iteration = nullptr);

std::string tree_to_json(const SearchTree& tree);
SearchTree tree_from_json(const std::string& text);
void save_tree(const std::string& path, const SearchTree& tree);
SearchTree load_tree(const std::string& path);

}  // namespace rgs
