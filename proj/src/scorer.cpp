#include "rgs/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rgs/errors.hpp"
#include "rgs/rng.hpp"

namespace rgs {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hashed features

static std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<std::pair<std::uint32_t, double>> hashed_features(const std::string& text,
                                                              const HashedFeatureSpec& spec) {
  std::vector<std::string> tokens = tokenize(text);
  std::vector<std::pair<std::uint32_t, double>> feats;
  std::uint32_t mask = spec.dim - 1;
  for (int n = spec.ngram_min; n <= spec.ngram_max; ++n) {
    if (n < 1) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (int k = 1; k < n; ++k) {
        gram += '\x1f';
        gram += tokens[i + k];
      }
      feats.push_back({static_cast<std::uint32_t>(fnv1a64(gram)) & mask, 1.0});
    }
  }
  // accumulate duplicate indices so each feature appears once
  std::sort(feats.begin(), feats.end());
  std::vector<std::pair<std::uint32_t, double>> out;
  for (const auto& [idx, cnt] : feats) {
    if (!out.empty() && out.back().first == idx)
      out.back().second += cnt;
    else
      out.push_back({idx, cnt});
  }
  return out;
}

static double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double HashedLinearModel::predict_text(const std::string& text) const {
  double acc = bias;
  for (const auto& [idx, cnt] : hashed_features(text, features)) acc += weights[idx] * cnt;
  return clamp01(acc);
}

void HashedLinearModel::save(const std::string& path) const {
  json j;
  j["schema"] = "explicit_rm.v1";
  j["dim"] = features.dim;
  j["ngram_min"] = features.ngram_min;
  j["ngram_max"] = features.ngram_max;
  j["render"] = {{"include_thought", render.include_thought},
                 {"include_observations", render.include_observations},
                 {"include_last_observation", render.include_last_observation}};
  j["clamp"] = {0.0, 1.0};
  j["bias"] = bias;
  j["weights"] = weights;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file: " + path);
  out << j.dump() << "\n";
}

HashedLinearModel HashedLinearModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("model file " + path + ": " + e.what());
  }
  if (j.value("schema", "") != "explicit_rm.v1")
    throw ConfigError("model file " + path + ": unknown schema");
  HashedLinearModel m;
  m.features.dim = j.at("dim").get<std::uint32_t>();
  m.features.ngram_min = j.at("ngram_min").get<int>();
  m.features.ngram_max = j.at("ngram_max").get<int>();
  m.render.include_thought = j.at("render").at("include_thought").get<bool>();
  m.render.include_observations = j.at("render").at("include_observations").get<bool>();
  m.render.include_last_observation = j.at("render").at("include_last_observation").get<bool>();
  m.bias = j.at("bias").get<double>();
  m.weights = j.at("weights").get<std::vector<double>>();
  if (m.weights.size() != m.features.dim) throw ConfigError("model file: weight arity mismatch");
  return m;
}

static double dataset_mse(const HashedLinearModel& model,
                          const std::vector<std::vector<std::pair<std::uint32_t, double>>>& feats,
                          const std::vector<double>& targets) {
  double acc = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    double pred = model.bias;
    for (const auto& [idx, cnt] : feats[i]) pred += model.weights[idx] * cnt;
    double err = clamp01(pred) - targets[i];
    acc += err * err;
  }
  return acc / static_cast<double>(feats.size());
}

HashedLinearModel train_explicit(const std::vector<ValueSample>& dataset,
                                 const TrainOptions& options, TrainReport* report) {
  if (dataset.empty()) throw ConfigError("cannot train on an empty dataset");
  if ((options.features.dim & (options.features.dim - 1)) != 0)
    throw ConfigError("feature dim must be a power of two");

  std::vector<std::vector<std::pair<std::uint32_t, double>>> feats;
  std::vector<double> targets;
  feats.reserve(dataset.size());
  for (const auto& s : dataset) {
    feats.push_back(hashed_features(s.rendered_state, options.features));
    targets.push_back(s.value);
  }

  HashedLinearModel model;
  model.features = options.features;
  model.render = options.render;
  model.weights.assign(options.features.dim, 0.0);
  model.bias = std::accumulate(targets.begin(), targets.end(), 0.0) /
               static_cast<double>(targets.size());

  // Best-epoch snapshot; the initial constant-at-mean model is candidate 0,
  // which makes the constant predictor a floor on final quality.
  HashedLinearModel best = model;
  double best_mse = dataset_mse(model, feats, targets);

  Rng rng(options.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with our own uniform draws, reproducible across platforms.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      if (j >= i) j = i - 1;
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t idx : order) {
      double pred = model.bias;
      for (const auto& [fi, cnt] : feats[idx]) pred += model.weights[fi] * cnt;
      double g = pred - targets[idx];
      model.bias -= options.learning_rate * g;
      for (const auto& [fi, cnt] : feats[idx])
        model.weights[fi] -=
            options.learning_rate * (g * cnt + options.l2 * model.weights[fi]);
    }
    double mse = dataset_mse(model, feats, targets);
    if (mse < best_mse) {
      best_mse = mse;
      best = model;
    }
  }

  if (report) {
    report->final_mse = best_mse;
    report->epochs = options.epochs;
    report->samples = dataset.size();
  }
  return best;
}

// ---------------------------------------------------------------------------
// Implicit reward

double implicit_step_reward(const Policy& policy, const Policy& reference,
                            const TrajectoryState& state, const ActionText& action, double beta) {
  return beta * (policy.logprob(state, action) - reference.logprob(state, action));
}

double implicit_trajectory_score(const Policy& policy, const Policy& reference,
                                 const TrajectoryState& final_state, double beta) {
  double acc = 0.0;
  TrajectoryState prefix = final_state;
  prefix.steps.clear();
  prefix.terminal = false;
  for (const StepRecord& step : final_state.steps) {
    acc += implicit_step_reward(policy, reference, prefix, step.action, beta);
    prefix.steps.push_back(step);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Oracle

double OracleScorer::score(const TrajectoryState& state) const {
  if (state.terminal) return env_.outcome_reward(state);
  // Same guard enumeration uses; the greedy continuation is then a single
  // deterministic path through that space.
  std::size_t support = env_.spec().action_vocabulary.size();
  int remaining = env_.spec().max_steps - state.depth();
  double bound = static_cast<double>(remaining) * std::log(static_cast<double>(support));
  if (bound > std::log(static_cast<double>(budget_)) + 1e-9)
    throw EnumerationTooLargeError("oracle enumeration exceeds budget");
  TrajectoryState cur = state;
  while (!cur.terminal) cur = env_.step(cur, greedy_action(policy_, cur));
  return env_.outcome_reward(cur);
}

double RandomScorer::score(const TrajectoryState& state) const {
  RenderOptions full;
  full.include_last_observation = true;
  std::uint64_t h = mix64(fnv1a64(render_state(state, full)) ^ mix64(seed_));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace rgs
