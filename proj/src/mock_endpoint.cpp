#include "rgs/mock_endpoint.hpp"

#include <cctype>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "rgs/errors.hpp"
#include "rgs/rng.hpp"

namespace rgs {

using json = nlohmann::json;

std::vector<std::string> mock_tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    std::size_t j = i;
    while (j < text.size() && (std::isspace(static_cast<unsigned char>(text[j])) != 0) == ws) ++j;
    tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

struct MockEndpoint::Impl {
  MockEndpointConfig config;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mu;
  int requests = 0;
  int failures_left = 0;
  json last_completion;
  json last_judge;

  explicit Impl(MockEndpointConfig cfg) : config(std::move(cfg)) {
    failures_left = config.fail_first;
  }

  bool maybe_fail(httplib::Response& res) {
    std::lock_guard<std::mutex> lock(mu);
    ++requests;
    if (failures_left > 0) {
      --failures_left;
      res.status = 500;
      res.set_content("injected failure", "text/plain");
      return true;
    }
    return false;
  }

  void finish(json reply, const json& request, httplib::Response& res) {
    if (config.echo_correlation && request.contains("correlation_id"))
      reply["correlation_id"] = request["correlation_id"];
    res.status = 200;
    res.set_content(reply.dump(), "application/json");
  }

  void handle_completions(const httplib::Request& req, httplib::Response& res) {
    if (maybe_fail(res)) return;
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mu);
      last_completion = body;
    }
    std::string prompt = body.value("prompt", "");
    int n = body.value("n", 1);
    double temperature = body.value("temperature", 1.0);
    std::uint64_t h = fnv1a64(prompt);
    json completions = json::array();
    for (int i = 0; i < n; ++i) {
      std::size_t idx =
          temperature == 0.0
              ? static_cast<std::size_t>(h % config.commands.size())
              : static_cast<std::size_t>(mix64(h + static_cast<std::uint64_t>(i)) %
                                         config.commands.size());
      std::string text = "Thought: " + config.thought + "\nAction: " + config.commands[idx];
      json item;
      item["text"] = text;
      item["tokens"] = mock_tokenize(text);
      std::vector<double> lps(item["tokens"].size(), config.token_logprob);
      item["token_logprobs"] = lps;
      completions.push_back(std::move(item));
    }
    finish(json{{"completions", std::move(completions)}}, body, res);
  }

  void handle_judge(const httplib::Request& req, httplib::Response& res) {
    if (maybe_fail(res)) return;
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mu);
      last_judge = body;
    }
    json reply;
    auto call_with_arguments = [](const json& arguments) {
      return json{{"tool_calls",
                   json::array({{{"type", "function"},
                                 {"function",
                                  {{"name", "choose_preferred_answer"},
                                   {"arguments", arguments.dump()}}}}})}};
    };
    if (config.judge_mode == "fixed") {
      reply = call_with_arguments(json{{"preference", config.judge_preference}});
    } else if (config.judge_mode == "invalid_enum") {
      reply = call_with_arguments(json{{"preference", 7}});
    } else if (config.judge_mode == "non_integer") {
      reply = call_with_arguments(json{{"preference", 2.5}});
    } else if (config.judge_mode == "missing_call") {
      reply = json{{"tool_calls", json::array()}};
    } else if (config.judge_mode == "wrong_name") {
      reply = json{{"tool_calls",
                    json::array({{{"type", "function"},
                                  {"function",
                                   {{"name", "pick_answer"},
                                    {"arguments", "{\"preference\": 1}"}}}}})}};
    } else if (config.judge_mode == "garbage_arguments") {
      reply = json{{"tool_calls",
                    json::array({{{"type", "function"},
                                  {"function",
                                   {{"name", "choose_preferred_answer"},
                                    {"arguments", "not json"}}}}})}};
    } else {
      res.status = 400;
      res.set_content("unknown judge_mode", "text/plain");
      return;
    }
    finish(std::move(reply), body, res);
  }
};

MockEndpoint::MockEndpoint(MockEndpointConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {
  if (impl_->config.commands.empty())
    throw ConfigError("mock endpoint needs at least one command");
  impl_->server.Post("/v1/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
    impl_->handle_completions(req, res);
  });
  impl_->server.Post("/v1/judge",
                     [this](const httplib::Request& req, httplib::Response& res) {
                       impl_->handle_judge(req, res);
                     });
}

MockEndpoint::~MockEndpoint() { stop(); }

int MockEndpoint::start() {
  int port = impl_->server.bind_to_any_port("127.0.0.1");
  if (port <= 0) throw ConfigError("mock endpoint could not bind a port");
  impl_->port = port;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void MockEndpoint::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

std::string MockEndpoint::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

int MockEndpoint::port() const { return impl_->port; }

int MockEndpoint::request_count() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->requests;
}

json MockEndpoint::last_completion_request() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->last_completion;
}

json MockEndpoint::last_judge_request() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->last_judge;
}

}  // namespace rgs
