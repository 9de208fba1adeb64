#include "rgs/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rgs/errors.hpp"

namespace rgs {

using json = nlohmann::json;

std::string state_key(const TrajectoryState& state) {
  std::string key = state.instruction.task_id;
  key += '\x1f';
  key += state.initial_observation.text;
  for (const auto& st : state.steps) {
    key += '\x1e';
    key += st.action.command;
    key += '\x1f';
    key += st.observation.text;
  }
  return key;
}

double logsumexp(const std::vector<double>& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double l : logits) acc += std::exp(l - m);
  return m + std::log(acc);
}

std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  double lse = logsumexp(scaled);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(scaled[i] - lse);
  return p;
}

int argmax_index(const std::vector<double>& values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;  // ties keep the lowest index
}

TabularPolicy::TabularPolicy(std::vector<std::string> vocabulary) : vocab_(std::move(vocabulary)) {
  if (vocab_.empty()) throw ConfigError("tabular policy needs a non-empty vocabulary");
  default_logits_.assign(vocab_.size(), 0.0);
}

TabularPolicy TabularPolicy::uniform(std::vector<std::string> vocabulary) {
  return TabularPolicy(std::move(vocabulary));
}

const std::vector<double>& TabularPolicy::logits_for(const std::string& key) const {
  auto it = logits_.find(key);
  return it == logits_.end() ? default_logits_ : it->second;
}

void TabularPolicy::set_logits(const std::string& key, std::vector<double> logits) {
  if (logits.size() != vocab_.size()) throw ConfigError("logit row arity mismatch");
  logits_[key] = std::move(logits);
}

void TabularPolicy::set_default_logits(std::vector<double> logits) {
  if (logits.size() != vocab_.size()) throw ConfigError("logit row arity mismatch");
  default_logits_ = std::move(logits);
}

std::vector<ActionSample> TabularPolicy::sample_actions(const TrajectoryState& state,
                                                        const PolicyConfig& config,
                                                        Rng& rng) const {
  if (state.terminal) throw IllegalQueryError("sample_actions on terminal state");
  if (config.sample_width_k < 1) throw ConfigError("sample_width_k must be >= 1");
  if (config.temperature <= 0.0) throw ConfigError("temperature must be > 0");

  const std::vector<double>& logits = logits_for(state_key(state));
  std::vector<double> probs = softmax(logits, config.temperature);

  std::vector<ActionSample> out;
  out.reserve(config.sample_width_k);
  if (config.greedy) {
    int i = argmax_index(logits);
    for (int k = 0; k < config.sample_width_k; ++k)
      out.push_back({{"", vocab_[i]}, std::log(probs[i])});
    return out;
  }
  for (int k = 0; k < config.sample_width_k; ++k) {
    int i = categorical(probs, rng);
    out.push_back({{"", vocab_[i]}, std::log(probs[i])});
  }
  return out;
}

double TabularPolicy::logprob(const TrajectoryState& state, const ActionText& action) const {
  auto it = std::find(vocab_.begin(), vocab_.end(), action.command);
  const std::vector<double>& logits = logits_for(state_key(state));
  if (it == vocab_.end()) {
    // OOV fallback: per-action mass of the uniform default row.
    return -std::log(static_cast<double>(vocab_.size()));
  }
  std::size_t i = static_cast<std::size_t>(it - vocab_.begin());
  return logits[i] - logsumexp(logits);
}

void TabularPolicy::save(const std::string& path) const {
  json j;
  j["schema"] = "tabular_policy.v1";
  j["vocabulary"] = vocab_;
  j["default_logits"] = default_logits_;
  json rows = json::object();
  for (const auto& [k, v] : logits_) rows[k] = v;
  j["logits"] = rows;
  j["empty_expert_warning"] = empty_expert_;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write policy file: " + path);
  out << j.dump(2) << "\n";
}

TabularPolicy TabularPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("policy file " + path + ": " + e.what());
  }
  if (j.value("schema", "") != "tabular_policy.v1")
    throw ConfigError("policy file " + path + ": unknown schema");
  TabularPolicy p(j.at("vocabulary").get<std::vector<std::string>>());
  p.set_default_logits(j.at("default_logits").get<std::vector<double>>());
  for (auto it = j.at("logits").begin(); it != j.at("logits").end(); ++it)
    p.set_logits(it.key(), it.value().get<std::vector<double>>());
  p.empty_expert_ = j.value("empty_expert_warning", false);
  return p;
}

TabularPolicy imitation_fit(const std::vector<EpisodeResult>& episodes,
                            std::vector<std::string> vocabulary, double smoothing) {
  if (smoothing < 0.0) throw ConfigError("smoothing must be >= 0");
  TabularPolicy policy(std::move(vocabulary));
  const std::vector<std::string>& vocab = policy.vocabulary();

  std::map<std::string, std::vector<double>> counts;
  for (const auto& ep : episodes) {
    TrajectoryState prefix = ep.final_state;
    prefix.steps.clear();
    prefix.terminal = false;
    for (const auto& st : ep.final_state.steps) {
      auto it = std::find(vocab.begin(), vocab.end(), st.action.command);
      if (it != vocab.end()) {
        auto& row = counts.try_emplace(state_key(prefix), vocab.size(), 0.0).first->second;
        row[static_cast<std::size_t>(it - vocab.begin())] += 1.0;
      }
      prefix.steps.push_back(st);
    }
  }

  for (const auto& [key, row] : counts) {
    std::vector<double> logits(vocab.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      double mass = row[i] + smoothing;
      logits[i] = mass > 0.0 ? std::log(mass) : kMinLogit;
    }
    policy.set_logits(key, std::move(logits));
  }
  policy.set_empty_expert_warning(counts.empty());
  return policy;
}

EpisodeResult rollout(const Policy& policy, const Environment& env, const TrajectoryState& state,
                      RolloutKind kind, double temperature, Rng& rng) {
  TrajectoryState cur = state;
  PolicyConfig cfg;
  cfg.temperature = temperature;
  cfg.sample_width_k = 1;
  cfg.greedy = kind == RolloutKind::greedy;
  while (!cur.terminal) {
    std::vector<ActionSample> s = policy.sample_actions(cur, cfg, rng);
    cur = env.step(cur, s.front().action);
  }
  EpisodeResult r;
  r.final_state = cur;
  r.outcome_reward = env.outcome_reward(cur);
  r.progress_rate = env.progress_rate(cur);
  return r;
}

ActionText greedy_action(const Policy& policy, const TrajectoryState& state) {
  PolicyConfig cfg;
  cfg.sample_width_k = 1;
  cfg.greedy = true;
  Rng rng(0);  // unused under greedy decoding
  return policy.sample_actions(state, cfg, rng).front().action;
}

}  // namespace rgs
