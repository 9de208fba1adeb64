#include "rgs/judge.hpp"

#include <cmath>

#include "rgs/errors.hpp"

namespace rgs {

using json = nlohmann::json;

JudgeClient::JudgeClient(std::string base_url, JudgeOptions options)
    : options_(std::move(options)), client_(std::move(base_url), options_.http) {}

namespace {

constexpr const char* kSeparator = "*******************************";

// Slot headers as they appear in the template, typos and all. Changing these
// would change the judge's input distribution, so they stay byte-frozen.
constexpr const char* kSlotHeaders[5] = {"CANDIDATE1", "CANDIDATE2", "CANIDATE3", "CANIDATE4",
                                         "CANIDATE5"};

}  // namespace

std::string JudgeClient::build_prompt(const std::string& task_description,
                                      const std::string& task_goal,
                                      const std::vector<std::string>& candidates) {
  if (candidates.empty() || candidates.size() > 5)
    throw ConfigError("judge takes 1 to 5 candidates, got " +
                      std::to_string(candidates.size()));
  std::string p;
  p += "You are trajectory reward model, an expert in defining which trajectory is better and "
       "closer to solving the task. Here is the task description:\n";
  p += kSeparator;
  p += "\ntask description: " + task_description;
  p += "\ntask goal: " + task_goal;
  p += '\n';
  p += kSeparator;
  p += "\nHere are several candidates. They are all trying to solve the task. Their trajectories "
       "are as follows.\n";
  p += kSeparator;
  p += '\n';
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    p += kSlotHeaders[i];
    p += ":\n";
    p += candidates[i];
    p += '\n';
    p += kSeparator;
    p += '\n';
  }
  return p;
}

const json& JudgeClient::tools_schema() {
  static const json schema = json::array(
      {{{"type", "function"},
        {"function",
         {{"name", "choose_preferred_answer"},
          {"description", "Choose the preferred answer for the task within all given answers."},
          {"parameters",
           {{"type", "object"},
            {"properties",
             {{"preference",
               {{"type", "number"},
                {"enum", {1, 2, 3, 4, 5}},
                {"description",
                 "The index of the preferred answer in all given answers (ranging from 1 to "
                 "5)."}}}}}}}}}}});
  return schema;
}

int JudgeClient::parse_preference(const json& response) {
  if (!response.contains("tool_calls") || !response["tool_calls"].is_array() ||
      response["tool_calls"].empty())
    throw JudgeProtocolError("response carries no function call");
  const json& call = response["tool_calls"][0];
  if (!call.contains("function") || !call["function"].is_object())
    throw JudgeProtocolError("tool call has no function object");
  const json& fn = call["function"];
  if (fn.value("name", "") != "choose_preferred_answer")
    throw JudgeProtocolError("unexpected function name \"" + fn.value("name", "") + "\"");
  json args;
  if (fn.contains("arguments") && fn["arguments"].is_string()) {
    try {
      args = json::parse(fn["arguments"].get<std::string>());
    } catch (const json::exception&) {
      throw JudgeProtocolError("function arguments are not valid JSON");
    }
  } else if (fn.contains("arguments") && fn["arguments"].is_object()) {
    args = fn["arguments"];
  } else {
    throw JudgeProtocolError("function call has no arguments");
  }
  if (!args.contains("preference") || !args["preference"].is_number())
    throw JudgeProtocolError("arguments carry no numeric \"preference\"");
  double v = args["preference"].get<double>();
  if (!(std::isfinite(v)) || v != std::floor(v))
    throw JudgeProtocolError("preference is not an integer");
  int p = static_cast<int>(v);
  if (p < 1 || p > 5)
    throw JudgeProtocolError("preference " + std::to_string(p) + " outside the 1..5 enum");
  return p;
}

int JudgeClient::select(const std::string& task_description, const std::string& task_goal,
                        const std::vector<std::string>& candidates) {
  std::string prompt = build_prompt(task_description, task_goal, candidates);
  json body = {{"prompt", prompt},
               {"tools", tools_schema()},
               {"tool_choice",
                {{"type", "function"}, {"function", {{"name", "choose_preferred_answer"}}}}}};
  json resp = client_.post_json(options_.path, std::move(body));
  int p = parse_preference(resp);
  int k = static_cast<int>(candidates.size());
  if (k == 1) return 1;
  if (p > k)
    throw JudgeProtocolError("preference " + std::to_string(p) + " names an omitted slot (" +
                             std::to_string(k) + " candidates)");
  return p;
}

}  // namespace rgs
