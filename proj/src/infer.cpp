#include "rgs/infer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "rgs/errors.hpp"
#include "rgs/rng.hpp"

namespace rgs {

std::vector<int> rank_candidates(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r) + 1;
  return ranks;
}

static std::vector<EpisodeResult> sample_stream(const Environment& env, const Policy& policy,
                                                int n, double temperature, std::uint64_t seed) {
  Rng rng(derive_seed(seed, env.task().task_id, 0));
  std::vector<EpisodeResult> episodes;
  episodes.reserve(n);
  for (int i = 0; i < n; ++i)
    episodes.push_back(rollout(policy, env, env.reset(), RolloutKind::sampled, temperature, rng));
  return episodes;
}

BestOfNResult best_of_n(const Environment& env, const Policy& policy, const Scorer& scorer,
                        int n, double temperature, std::uint64_t seed) {
  if (n < 1) throw ConfigError("best_of_n needs n >= 1");
  BestOfNResult result;
  std::vector<EpisodeResult> episodes = sample_stream(env, policy, n, temperature, seed);
  for (const EpisodeResult& e : episodes) result.rewards.push_back(e.outcome_reward);
  int best = 0;
  if (n > 1) {
    for (const EpisodeResult& e : episodes)
      result.scores.push_back(scorer.score(e.final_state));
    for (int i = 1; i < n; ++i)
      if (result.scores[i] > result.scores[best]) best = i;
  }
  result.selected_index = best;
  result.episode = episodes[best];
  return result;
}

BestOfNResult best_of_n_judge(const Environment& env, const Policy& policy, JudgeClient& judge,
                              int n, double temperature, std::uint64_t seed) {
  if (n < 1 || n > 5) throw ConfigError("judge-selected best_of_n needs 1 <= n <= 5");
  BestOfNResult result;
  std::vector<EpisodeResult> episodes = sample_stream(env, policy, n, temperature, seed);
  for (const EpisodeResult& e : episodes) result.rewards.push_back(e.outcome_reward);
  int best = 0;
  if (n > 1) {
    RenderOptions full{true, true, true};
    std::vector<std::string> rendered;
    rendered.reserve(episodes.size());
    for (const EpisodeResult& e : episodes) rendered.push_back(render_state(e.final_state, full));
    try {
      best = judge.select(env.spec().name, env.task().text, rendered) - 1;
    } catch (const JudgeProtocolError& e) {
      std::fprintf(stderr, "warning: judge protocol violation (%s); falling back to candidate 1\n",
                   e.what());
      best = 0;
      result.judge_fallbacks = 1;
    }
  }
  result.selected_index = best;
  result.episode = episodes[best];
  return result;
}

// ---------------------------------------------------------------------------
// Beam search

static std::string command_path(const TrajectoryState& state) {
  std::string out;
  for (const StepRecord& step : state.steps) {
    if (!out.empty()) out += " / ";
    out += step.action.command;
  }
  return out;
}

static std::vector<TrajectoryState> expand_state(const Environment& env, const Policy& policy,
                                                 const TrajectoryState& state, int width,
                                                 double temperature, bool greedy, Rng& rng) {
  PolicyConfig cfg;
  cfg.temperature = temperature;
  cfg.sample_width_k = width;
  cfg.greedy = greedy;
  std::vector<ActionSample> samples = policy.sample_actions(state, cfg, rng);
  std::vector<TrajectoryState> children;
  std::vector<std::string> seen;
  for (const ActionSample& s : samples) {
    if (std::find(seen.begin(), seen.end(), s.action.command) != seen.end()) continue;
    seen.push_back(s.action.command);
    children.push_back(env.step(state, s.action));
  }
  return children;
}

BeamResult beam_search(const Environment& env, const Policy& policy, const Scorer& scorer,
                       const BeamConfig& config, std::uint64_t seed) {
  if (config.beam_width < 1 || config.expansion_width < 1)
    throw ConfigError("beam widths must be >= 1");
  Rng rng(derive_seed(seed, env.task().task_id, 1));
  BeamResult result;

  std::vector<TrajectoryState> candidates =
      expand_state(env, policy, env.reset(), config.beam_width * config.expansion_width,
                   config.temperature, config.greedy, rng);

  for (int layer = 0;; ++layer) {
    BeamLayerTrace trace;
    trace.layer = layer;
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const TrajectoryState& s : candidates) {
      scores.push_back(scorer.score(s));
      trace.candidates.push_back(command_path(s));
      trace.terminal.push_back(s.terminal);
    }
    trace.scores = scores;

    std::vector<int> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    std::size_t keep = std::min<std::size_t>(order.size(),
                                             static_cast<std::size_t>(config.beam_width));
    trace.kept.assign(order.begin(), order.begin() + keep);
    result.layers.push_back(trace);

    bool all_terminal = true;
    for (std::size_t r = 0; r < keep; ++r)
      if (!candidates[order[r]].terminal) all_terminal = false;
    if (all_terminal) {
      const TrajectoryState& winner = candidates[order[0]];
      result.episode.final_state = winner;
      result.episode.outcome_reward = env.outcome_reward(winner);
      result.episode.progress_rate = env.progress_rate(winner);
      return result;
    }

    std::vector<TrajectoryState> next;
    for (std::size_t r = 0; r < keep; ++r) {
      const TrajectoryState& s = candidates[order[r]];
      if (s.terminal) {
        next.push_back(s);  // frozen, keeps its slot
        continue;
      }
      std::vector<TrajectoryState> children = expand_state(
          env, policy, s, config.expansion_width, config.temperature, config.greedy, rng);
      next.insert(next.end(), children.begin(), children.end());
    }
    candidates = std::move(next);
  }
}

EpisodeResult greedy_decode(const Environment& env, const Policy& policy) {
  Rng rng(0);  // greedy rollouts never draw from it
  return rollout(policy, env, env.reset(), RolloutKind::greedy, 1.0, rng);
}

}  // namespace rgs
