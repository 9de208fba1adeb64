#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgs/dataset.hpp"
#include "rgs/env.hpp"
#include "rgs/judge.hpp"
#include "rgs/policy.hpp"
#include "rgs/scorer.hpp"
#include "rgs/types.hpp"

namespace rgs {

/// 1-based ranks for a score vector; ties broken by earlier position, so the
/// result is always a permutation of 1..n.
std::vector<int> rank_candidates(const std::vector<double>& scores);

struct BestOfNResult {
  EpisodeResult episode;
  int selected_index = 0;        // 0-based position in the sample stream
  std::vector<double> rewards;   // per-candidate outcome rewards
  std::vector<double> scores;    // per-candidate scorer values; empty when n == 1
  int judge_fallbacks = 0;
};

/// Samples n complete episodes at `temperature` and returns the one the
/// scorer prefers (ties to the earliest sample). The samples come from one
/// sequential stream, so growing n keeps earlier candidates unchanged. With
/// n == 1 the scorer is never consulted.
BestOfNResult best_of_n(const Environment& env, const Policy& policy, const Scorer& scorer,
                        int n, double temperature, std::uint64_t seed);

/// Best-of-N with the judge as selector. n is capped at 5 by the prompt's
/// slot count. A judge protocol violation falls back to the first candidate
/// and is counted; transport failures propagate.
BestOfNResult best_of_n_judge(const Environment& env, const Policy& policy, JudgeClient& judge,
                              int n, double temperature, std::uint64_t seed);

struct BeamConfig {
  int beam_width = 5;       // W1, states kept per layer
  int expansion_width = 5;  // W2, sampled actions per kept state
  double temperature = 1.0;
  bool greedy = false;
};

struct BeamLayerTrace {
  int layer = 0;
  std::vector<std::string> candidates;  // command paths, oldest action first
  std::vector<double> scores;
  std::vector<bool> terminal;
  std::vector<int> kept;  // indices into candidates, best first
};

struct BeamResult {
  EpisodeResult episode;
  std::vector<BeamLayerTrace> layers;
};

/// Step-level beam search: W1*W2 sampled first actions, then keep the W1
/// highest-scoring states per layer and expand each survivor with W2 sampled
/// actions. Identical sibling commands merge. Terminal states freeze and keep
/// occupying their beam slot until every maintained state is terminal; the
/// highest-scoring terminal wins.
BeamResult beam_search(const Environment& env, const Policy& policy, const Scorer& scorer,
                       const BeamConfig& config, std::uint64_t seed);

/// Argmax action at every step. The no-search baseline.
EpisodeResult greedy_decode(const Environment& env, const Policy& policy);

}  // namespace rgs
