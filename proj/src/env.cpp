#include "rgs/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rgs/errors.hpp"

namespace rgs {

using json = nlohmann::json;

namespace {

std::string pos_str(int x, int y) {
  return "(" + std::to_string(x) + "," + std::to_string(y) + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// Task suite io

static GridLayout layout_from_json(const json& j) {
  GridLayout g;
  g.width = j.at("width").get<int>();
  g.height = j.at("height").get<int>();
  if (j.contains("start")) {
    g.start_x = j["start"].at(0).get<int>();
    g.start_y = j["start"].at(1).get<int>();
  }
  for (const auto& it : j.value("items", json::array())) {
    GridItem item;
    item.name = it.at("name").get<std::string>();
    item.x = it.at("pos").at(0).get<int>();
    item.y = it.at("pos").at(1).get<int>();
    g.items.push_back(std::move(item));
  }
  return g;
}

static json layout_to_json(const GridLayout& g) {
  json j;
  j["width"] = g.width;
  j["height"] = g.height;
  j["start"] = {g.start_x, g.start_y};
  json items = json::array();
  for (const auto& it : g.items) items.push_back({{"name", it.name}, {"pos", {it.x, it.y}}});
  j["items"] = items;
  return j;
}

static TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  t.task_id = j.at("task_id").get<std::string>();
  t.text = j.at("text").get<std::string>();
  t.max_steps = j.at("max_steps").get<int>();
  for (const auto& s : j.at("subgoals")) t.subgoals.push_back(s.get<std::string>());
  if (j.contains("layout")) t.layout = layout_from_json(j["layout"]);
  for (const auto& p : j.value("catalog", json::array())) {
    Product prod;
    prod.id = p.at("id").get<std::string>();
    prod.name = p.at("name").get<std::string>();
    for (const auto& a : p.at("attributes")) prod.attributes.push_back(a.get<std::string>());
    t.catalog.push_back(std::move(prod));
  }
  for (const auto& a : j.value("actions", json::array())) t.actions.push_back(a.get<std::string>());
  if (j.contains("aliases")) {
    for (auto it = j["aliases"].begin(); it != j["aliases"].end(); ++it)
      t.aliases[it.key()] = it.value().get<std::string>();
  }
  t.weight = j.value("weight", 1);
  if (t.weight < 1) throw ConfigError("task " + t.task_id + ": weight must be >= 1");
  return t;
}

static json task_to_json(const TaskSpec& t) {
  json j;
  j["task_id"] = t.task_id;
  j["text"] = t.text;
  j["max_steps"] = t.max_steps;
  j["subgoals"] = t.subgoals;
  if (t.layout) j["layout"] = layout_to_json(*t.layout);
  if (!t.catalog.empty()) {
    json cat = json::array();
    for (const auto& p : t.catalog)
      cat.push_back({{"id", p.id}, {"name", p.name}, {"attributes", p.attributes}});
    j["catalog"] = cat;
  }
  if (!t.actions.empty()) j["actions"] = t.actions;
  if (!t.aliases.empty()) {
    json al = json::object();
    for (const auto& [k, v] : t.aliases) al[k] = v;
    j["aliases"] = al;
  }
  if (t.weight != 1) j["weight"] = t.weight;
  return j;
}

std::vector<TaskSpec> load_task_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task suite: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("task suite " + path + ": " + e.what());
  }
  if (!j.is_array()) throw ConfigError("task suite " + path + ": top level must be an array");
  std::vector<TaskSpec> suite;
  std::set<std::string> seen;
  for (const auto& tj : j) {
    TaskSpec t;
    try {
      t = task_from_json(tj);
    } catch (const json::exception& e) {
      throw ConfigError("task suite " + path + ": " + e.what());
    }
    if (!seen.insert(t.task_id).second)
      throw ConfigError("task suite " + path + ": duplicate task_id " + t.task_id);
    make_environment(t);  // validate eagerly
    suite.push_back(std::move(t));
  }
  return suite;
}

void save_task_suite(const std::string& path, const std::vector<TaskSpec>& suite) {
  json j = json::array();
  for (const auto& t : suite) j.push_back(task_to_json(t));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write task suite: " + path);
  out << j.dump(2) << "\n";
}

const TaskSpec& find_task(const std::vector<TaskSpec>& suite, const std::string& task_id) {
  for (const auto& t : suite)
    if (t.task_id == task_id) return t;
  throw TaskNotFoundError("no task with id " + task_id);
}

// ---------------------------------------------------------------------------
// Environment base

TrajectoryState Environment::reset() const {
  if (task_.text.empty()) throw ConfigError("instruction text is empty: " + task_.task_id);
  TrajectoryState s;
  s.instruction = instruction();
  s.initial_observation = {initial_observation()};
  s.terminal = false;
  return s;
}

std::string Environment::resolve_command(const std::string& command) const {
  auto it = task_.aliases.find(command);
  return it == task_.aliases.end() ? command : it->second;
}

bool Environment::in_vocabulary(const std::string& command) const {
  const auto& v = spec_.action_vocabulary;
  return std::find(v.begin(), v.end(), command) != v.end();
}

TrajectoryState Environment::step(const TrajectoryState& state, const ActionText& action) const {
  if (state.terminal) throw IllegalTransitionError("step on terminal state");
  if (state.depth() >= spec_.max_steps) throw IllegalTransitionError("step past budget");

  StepResult r;
  if (!in_vocabulary(action.command)) {
    r.observation = "Nothing happens.";
  } else {
    r = apply(state, resolve_command(action.command));
  }

  TrajectoryState next = state;
  next.steps.push_back({action, {r.observation}});
  next.terminal = r.finished || next.depth() >= spec_.max_steps;
  return next;
}

double Environment::outcome_reward(const TrajectoryState& state) const {
  if (!state.terminal) throw NotTerminalError("outcome reward on non-terminal state");
  return fold(state).progress;
}

std::optional<double> Environment::progress_rate(const TrajectoryState& state) const {
  return fold(state).progress;
}

// ---------------------------------------------------------------------------
// GridGoal: walk a small grid, items are picked up on entry, the ordered
// subgoal prefix ("pickup:<item>", "reach:<x>,<y>") defines progress and the
// task finishes when the whole prefix is complete.

class GridGoalEnv : public Environment {
 public:
  explicit GridGoalEnv(TaskSpec task) : Environment(std::move(task)) {
    const GridLayout& g = *task_.layout;
    if (g.width < 1 || g.height < 1) throw ConfigError(task_.task_id + ": empty grid");
    if (g.start_x < 0 || g.start_x >= g.width || g.start_y < 0 || g.start_y >= g.height)
      throw ConfigError(task_.task_id + ": start out of bounds");
    if (task_.subgoals.empty()) throw ConfigError(task_.task_id + ": no subgoals");
    for (const auto& sg : task_.subgoals) parse_subgoal(sg);
    if (task_.max_steps < 1) throw ConfigError(task_.task_id + ": max_steps must be >= 1");

    spec_.name = "gridgoal";
    spec_.max_steps = task_.max_steps;
    spec_.deterministic = true;
    spec_.action_vocabulary = task_.actions.empty()
                                  ? std::vector<std::string>{"move north", "move south",
                                                             "move east", "move west"}
                                  : task_.actions;
  }

 protected:
  struct World {
    int x = 0, y = 0;
    std::vector<bool> picked;  // parallel to layout items
    std::size_t done = 0;      // completed subgoal prefix
    bool finished = false;
  };

  struct Subgoal {
    enum Kind { pickup, reach } kind;
    std::string item;
    int x = 0, y = 0;
  };

  static Subgoal parse_subgoal(const std::string& s) {
    Subgoal sg;
    if (s.rfind("pickup:", 0) == 0) {
      sg.kind = Subgoal::pickup;
      sg.item = s.substr(7);
      if (sg.item.empty()) throw ConfigError("bad subgoal: " + s);
      return sg;
    }
    if (s.rfind("reach:", 0) == 0) {
      sg.kind = Subgoal::reach;
      std::string rest = s.substr(6);
      auto comma = rest.find(',');
      if (comma == std::string::npos) throw ConfigError("bad subgoal: " + s);
      try {
        sg.x = std::stoi(rest.substr(0, comma));
        sg.y = std::stoi(rest.substr(comma + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad subgoal: " + s);
      }
      return sg;
    }
    throw ConfigError("bad subgoal: " + s);
  }

  World initial_world() const {
    const GridLayout& g = *task_.layout;
    World w;
    w.x = g.start_x;
    w.y = g.start_y;
    w.picked.assign(g.items.size(), false);
    advance_subgoals(w);
    return w;
  }

  bool satisfied(const Subgoal& sg, const World& w) const {
    if (sg.kind == Subgoal::pickup) {
      const GridLayout& g = *task_.layout;
      for (std::size_t i = 0; i < g.items.size(); ++i)
        if (g.items[i].name == sg.item && w.picked[i]) return true;
      return false;
    }
    return w.x == sg.x && w.y == sg.y;
  }

  // Ordered semantics: the prefix counter only ever advances, and a subgoal
  // must hold at the moment it becomes the next one.
  void advance_subgoals(World& w) const {
    while (w.done < task_.subgoals.size() &&
           satisfied(parse_subgoal(task_.subgoals[w.done]), w))
      ++w.done;
    w.finished = w.done == task_.subgoals.size();
  }

  // Applies one canonical command; appends pickup fragments to `events`.
  void apply_world(World& w, const std::string& canonical, std::string* events,
                   bool* bumped) const {
    const GridLayout& g = *task_.layout;
    int dx = 0, dy = 0;
    if (canonical == "move north")
      dy = 1;
    else if (canonical == "move south")
      dy = -1;
    else if (canonical == "move east")
      dx = 1;
    else if (canonical == "move west")
      dx = -1;
    else
      return;  // vocabulary entry without grid semantics: no-op move

    int nx = w.x + dx, ny = w.y + dy;
    if (nx < 0 || nx >= g.width || ny < 0 || ny >= g.height) {
      if (bumped) *bumped = true;
    } else {
      w.x = nx;
      w.y = ny;
    }
    for (std::size_t i = 0; i < g.items.size(); ++i) {
      if (!w.picked[i] && g.items[i].x == w.x && g.items[i].y == w.y) {
        w.picked[i] = true;
        if (events) *events += " You pick up the " + g.items[i].name + ".";
      }
    }
    advance_subgoals(w);
  }

  World replay(const TrajectoryState& state) const {
    World w = initial_world();
    for (const auto& st : state.steps) {
      if (!in_vocabulary(st.action.command)) continue;
      apply_world(w, resolve_command(st.action.command), nullptr, nullptr);
    }
    return w;
  }

  std::string initial_observation() const override {
    const GridLayout& g = *task_.layout;
    std::string obs = "You are at " + pos_str(g.start_x, g.start_y) + ".";
    if (g.items.empty()) {
      obs += " You see nothing special.";
    } else {
      obs += " You see: ";
      for (std::size_t i = 0; i < g.items.size(); ++i) {
        if (i) obs += ", ";
        obs += g.items[i].name + " at " + pos_str(g.items[i].x, g.items[i].y);
      }
      obs += ".";
    }
    return obs;
  }

  StepResult apply(const TrajectoryState& state, const std::string& canonical) const override {
    World w = replay(state);
    std::string events;
    bool bumped = false;
    apply_world(w, canonical, &events, &bumped);
    std::string obs;
    if (bumped) obs += "You bump into a wall. ";
    obs += "You are at " + pos_str(w.x, w.y) + ".";
    obs += events;
    if (w.finished) obs += " Task complete!";
    return {obs, w.finished};
  }

  Fold fold(const TrajectoryState& state) const override {
    World w = replay(state);
    return {static_cast<double>(w.done) / static_cast<double>(task_.subgoals.size()),
            w.finished};
  }
};

// ---------------------------------------------------------------------------
// ShopToy: inspect and buy from a small catalog; the reward is the fraction of
// target attributes (the subgoal table) matched by the purchase.

class ShopToyEnv : public Environment {
 public:
  explicit ShopToyEnv(TaskSpec task) : Environment(std::move(task)) {
    if (task_.catalog.empty()) throw ConfigError(task_.task_id + ": empty catalog");
    if (task_.subgoals.empty()) throw ConfigError(task_.task_id + ": no target attributes");
    if (task_.max_steps < 1) throw ConfigError(task_.task_id + ": max_steps must be >= 1");
    std::set<std::string> ids;
    for (const auto& p : task_.catalog)
      if (!ids.insert(p.id).second)
        throw ConfigError(task_.task_id + ": duplicate product id " + p.id);

    spec_.name = "shoptoy";
    spec_.max_steps = task_.max_steps;
    spec_.deterministic = true;
    if (task_.actions.empty()) {
      spec_.action_vocabulary.push_back("look");
      for (const auto& p : task_.catalog) spec_.action_vocabulary.push_back("inspect " + p.id);
      for (const auto& p : task_.catalog) spec_.action_vocabulary.push_back("buy " + p.id);
    } else {
      spec_.action_vocabulary = task_.actions;
    }
  }

 protected:
  const Product* product(const std::string& id) const {
    for (const auto& p : task_.catalog)
      if (p.id == id) return &p;
    return nullptr;
  }

  double match_fraction(const Product& p) const {
    std::size_t hit = 0;
    for (const auto& want : task_.subgoals)
      if (std::find(p.attributes.begin(), p.attributes.end(), want) != p.attributes.end()) ++hit;
    return static_cast<double>(hit) / static_cast<double>(task_.subgoals.size());
  }

  const Product* bought(const TrajectoryState& state) const {
    for (const auto& st : state.steps) {
      if (!in_vocabulary(st.action.command)) continue;
      std::string canonical = resolve_command(st.action.command);
      if (canonical.rfind("buy ", 0) == 0) {
        const Product* p = product(canonical.substr(4));
        if (p) return p;  // first successful purchase ends the episode anyway
      }
    }
    return nullptr;
  }

  std::string initial_observation() const override {
    return "Welcome to the shop. There are " + std::to_string(task_.catalog.size()) +
           " products on the shelf.";
  }

  StepResult apply(const TrajectoryState& state, const std::string& canonical) const override {
    (void)state;
    if (canonical == "look") {
      std::string obs = "Products:";
      for (std::size_t i = 0; i < task_.catalog.size(); ++i) {
        obs += i ? ", " : " ";
        obs += task_.catalog[i].id + " (" + task_.catalog[i].name + ")";
      }
      obs += ".";
      return {obs, false};
    }
    if (canonical.rfind("inspect ", 0) == 0) {
      const Product* p = product(canonical.substr(8));
      if (!p) return {"Nothing happens.", false};
      std::string obs = p->id + ": " + p->name + ". Attributes:";
      for (std::size_t i = 0; i < p->attributes.size(); ++i) {
        obs += i ? ", " : " ";
        obs += p->attributes[i];
      }
      obs += ".";
      return {obs, false};
    }
    if (canonical.rfind("buy ", 0) == 0) {
      const Product* p = product(canonical.substr(4));
      if (!p) return {"Nothing happens.", false};
      return {"You buy " + p->id + " (" + p->name + "). Order complete.", true};
    }
    return {"Nothing happens.", false};
  }

  Fold fold(const TrajectoryState& state) const override {
    const Product* p = bought(state);
    if (!p) return {0.0, false};
    return {match_fraction(*p), true};
  }
};

std::unique_ptr<Environment> make_environment(const TaskSpec& task) {
  if (task.task_id.empty()) throw ConfigError("task without task_id");
  bool grid = task.layout.has_value();
  bool shop = !task.catalog.empty();
  if (grid && shop) throw ConfigError(task.task_id + ": both layout and catalog present");
  if (grid) return std::make_unique<GridGoalEnv>(task);
  if (shop) return std::make_unique<ShopToyEnv>(task);
  throw ConfigError(task.task_id + ": neither layout nor catalog present");
}

// ---------------------------------------------------------------------------
// Enumeration

static void check_budget(std::size_t support, int remaining, std::uint64_t budget) {
  double bound = static_cast<double>(remaining) * std::log(static_cast<double>(support));
  if (support == 0) throw ConfigError("empty action support");
  if (bound > std::log(static_cast<double>(budget)) + 1e-9)
    throw EnumerationTooLargeError("enumeration over " + std::to_string(support) + "^" +
                                   std::to_string(remaining) + " exceeds budget " +
                                   std::to_string(budget));
}

static void enumerate_rec(const Environment& env, const TrajectoryState& state,
                          const std::vector<std::string>& support,
                          std::vector<EpisodeResult>& out) {
  if (state.terminal) {
    EpisodeResult r;
    r.final_state = state;
    r.outcome_reward = env.outcome_reward(state);
    r.progress_rate = env.progress_rate(state);
    out.push_back(std::move(r));
    return;
  }
  for (const auto& cmd : support)
    enumerate_rec(env, env.step(state, {"", cmd}), support, out);
}

std::vector<EpisodeResult> enumerate_from(const Environment& env, const TrajectoryState& state,
                                          const std::vector<std::string>& support,
                                          std::uint64_t budget) {
  const std::vector<std::string>& sup =
      support.empty() ? env.spec().action_vocabulary : support;
  check_budget(sup.size(), env.spec().max_steps - state.depth(), budget);
  std::vector<EpisodeResult> out;
  enumerate_rec(env, state, sup, out);
  return out;
}

std::vector<EpisodeResult> enumerate_all_episodes(const Environment& env,
                                                  const std::vector<std::string>& support,
                                                  std::uint64_t budget) {
  return enumerate_from(env, env.reset(), support, budget);
}

EpisodeResult expert_episode(const Environment& env, std::uint64_t budget) {
  std::vector<EpisodeResult> all = enumerate_all_episodes(env, {}, budget);
  auto commands = [](const EpisodeResult& e) {
    std::vector<std::string> c;
    for (const auto& st : e.final_state.steps) c.push_back(st.action.command);
    return c;
  };
  const EpisodeResult* best = &all.front();
  std::vector<std::string> best_cmds = commands(*best);
  for (const auto& e : all) {
    std::vector<std::string> cmds = commands(e);
    if (e.outcome_reward > best->outcome_reward + 1e-12 ||
        (std::abs(e.outcome_reward - best->outcome_reward) <= 1e-12 &&
         (cmds.size() < best_cmds.size() ||
          (cmds.size() == best_cmds.size() && cmds < best_cmds)))) {
      best = &e;
      best_cmds = std::move(cmds);
    }
  }
  return *best;
}

}  // namespace rgs
