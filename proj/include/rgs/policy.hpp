#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rgs/env.hpp"
#include "rgs/rng.hpp"
#include "rgs/types.hpp"

namespace rgs {

struct PolicyConfig {
  double temperature = 1.0;
  int sample_width_k = 5;
  bool greedy = false;
};

/// One sampled action. logprob is the natural log of the sampling
/// distribution's probability of the command (temperature-adjusted). Under
/// greedy decoding it reports the softmax probability of the argmax command.
struct ActionSample {
  ActionText action;
  double logprob = 0.0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  /// k = config.sample_width_k draws (or the argmax repeated k times when
  /// config.greedy). Throws IllegalQueryError on terminal states.
  virtual std::vector<ActionSample> sample_actions(const TrajectoryState& state,
                                                   const PolicyConfig& config, Rng& rng) const = 0;

  /// Temperature-1 log probability of `action.command` at `state`, used for
  /// scoring regardless of what temperature sampled the trajectory. Always
  /// finite for tabular policies.
  virtual double logprob(const TrajectoryState& state, const ActionText& action) const = 0;
};

/// Canonical lookup key for a state: task id, initial observation and the
/// (command, observation) history. Thoughts are excluded so that actions with
/// identical commands share statistics.
std::string state_key(const TrajectoryState& state);

/// Logit value standing in for log(0); exp() underflows to exactly zero and
/// the value survives JSON round trips (infinities do not).
inline constexpr double kMinLogit = -1e9;

/// Softmax policy over a fixed command vocabulary with one logit row per state
/// key and a uniform default row for unseen states.
class TabularPolicy : public Policy {
 public:
  TabularPolicy() = default;
  explicit TabularPolicy(std::vector<std::string> vocabulary);

  static TabularPolicy uniform(std::vector<std::string> vocabulary);

  std::vector<ActionSample> sample_actions(const TrajectoryState& state,
                                           const PolicyConfig& config, Rng& rng) const override;
  double logprob(const TrajectoryState& state, const ActionText& action) const override;

  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::vector<double>& logits_for(const std::string& key) const;
  void set_logits(const std::string& key, std::vector<double> logits);
  void set_default_logits(std::vector<double> logits);

  /// Set when an imitation fit saw no data and the policy is pure uniform.
  bool empty_expert_warning() const { return empty_expert_; }
  void set_empty_expert_warning(bool w) { empty_expert_ = w; }

  std::size_t table_size() const { return logits_.size(); }

  void save(const std::string& path) const;
  static TabularPolicy load(const std::string& path);

 private:
  std::vector<std::string> vocab_;
  std::vector<double> default_logits_;
  std::map<std::string, std::vector<double>> logits_;
  bool empty_expert_ = false;
};

/// Count-based behavior cloning: logit(a|s) = log(count + smoothing), so the
/// temperature-1 softmax reproduces additive smoothing exactly. States never
/// seen in the episodes keep the uniform default row.
TabularPolicy imitation_fit(const std::vector<EpisodeResult>& episodes,
                            std::vector<std::string> vocabulary, double smoothing);

enum class RolloutKind { greedy, sampled };

/// Plays the policy from `state` until the environment terminates.
EpisodeResult rollout(const Policy& policy, const Environment& env, const TrajectoryState& state,
                      RolloutKind kind, double temperature, Rng& rng);

/// Probabilities and per-action logprobs for a logit row at temperature tau.
std::vector<double> softmax(const std::vector<double>& logits, double temperature);
double logsumexp(const std::vector<double>& logits);
int argmax_index(const std::vector<double>& values);

ActionText greedy_action(const Policy& policy, const TrajectoryState& state);

}  // namespace rgs
