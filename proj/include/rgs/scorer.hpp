#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgs/dataset.hpp"
#include "rgs/env.hpp"
#include "rgs/policy.hpp"
#include "rgs/types.hpp"

namespace rgs {

/// Scalar judgment of a state (mid-trajectory or terminal). The judge is
/// deliberately not a Scorer: it only ranks candidate sets (see judge.hpp).
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const TrajectoryState& state) const = 0;
  virtual std::string name() const = 0;
};

enum class ScorerKind { explicit_rm, implicit_rm, judge, oracle, random };

// ---------------------------------------------------------------------------
// Explicit reward model: linear regression over hashed token n-grams (n=1,2)
// of the rendered state, output clamped to [0,1].

struct HashedFeatureSpec {
  std::uint32_t dim = 1u << 18;
  int ngram_min = 1;
  int ngram_max = 2;
};

struct HashedLinearModel {
  HashedFeatureSpec features;
  RenderOptions render;  // rendering used at training time, reused at scoring
  std::vector<double> weights;
  double bias = 0.0;

  /// Clamped prediction for already-rendered text.
  double predict_text(const std::string& text) const;

  void save(const std::string& path) const;
  static HashedLinearModel load(const std::string& path);
};

/// Sparse hashed n-gram counts for one rendered state.
std::vector<std::pair<std::uint32_t, double>> hashed_features(const std::string& text,
                                                              const HashedFeatureSpec& spec);

struct TrainOptions {
  int epochs = 60;
  // Count features are unnormalized, so the stable step size scales with
  // 1 / (typical active-feature count); 0.005 holds up to a few hundred
  // n-grams per rendered state.
  double learning_rate = 0.005;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  HashedFeatureSpec features;
  RenderOptions render;
};

struct TrainReport {
  double final_mse = 0.0;
  int epochs = 0;
  std::size_t samples = 0;
};

/// SGD on mean squared error over the dataset. The bias starts at the target
/// mean and the best epoch snapshot (by full-dataset MSE of the clamped
/// predictor) is returned, so the result is never worse than the best constant
/// model. Deterministic given the seed.
HashedLinearModel train_explicit(const std::vector<ValueSample>& dataset,
                                 const TrainOptions& options, TrainReport* report = nullptr);

class ExplicitScorer : public Scorer {
 public:
  explicit ExplicitScorer(HashedLinearModel model) : model_(std::move(model)) {}
  double score(const TrajectoryState& state) const override {
    return model_.predict_text(render_state(state, model_.render));
  }
  std::string name() const override { return "explicit"; }
  const HashedLinearModel& model() const { return model_; }

 private:
  HashedLinearModel model_;
};

// ---------------------------------------------------------------------------
// Implicit reward: r_t = beta * (log pi(a_t|s_t) - log pi_ref(a_t|s_t)),
// both at temperature 1 regardless of the sampling temperature.

double implicit_step_reward(const Policy& policy, const Policy& reference,
                            const TrajectoryState& state, const ActionText& action, double beta);

/// Sum of step rewards over the episode; telescopes to beta times the
/// full-trajectory log ratio.
double implicit_trajectory_score(const Policy& policy, const Policy& reference,
                                 const TrajectoryState& final_state, double beta);

inline constexpr double kDefaultImplicitBeta = 0.05;

class ImplicitScorer : public Scorer {
 public:
  ImplicitScorer(const Policy& policy, const Policy& reference, double beta = kDefaultImplicitBeta)
      : policy_(policy), reference_(reference), beta_(beta) {}
  double score(const TrajectoryState& state) const override {
    return implicit_trajectory_score(policy_, reference_, state, beta_);
  }
  std::string name() const override { return "implicit"; }
  double beta() const { return beta_; }

 private:
  const Policy& policy_;
  const Policy& reference_;
  double beta_;
};

// ---------------------------------------------------------------------------
// Oracle: exact greedy-rollout return from the state. Terminal states score
// their outcome reward. Requires an enumerable deterministic environment; the
// budget guard mirrors enumeration's.

class OracleScorer : public Scorer {
 public:
  OracleScorer(const Environment& env, const Policy& policy, std::uint64_t budget = 1u << 20)
      : env_(env), policy_(policy), budget_(budget) {}
  double score(const TrajectoryState& state) const override;
  std::string name() const override { return "oracle"; }

 private:
  const Environment& env_;
  const Policy& policy_;
  std::uint64_t budget_;
};

/// Seeded hash of the rendered state to [0,1). Diagnostics baseline.
class RandomScorer : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  double score(const TrajectoryState& state) const override;
  std::string name() const override { return "random"; }

 private:
  std::uint64_t seed_;
};

}  // namespace rgs
