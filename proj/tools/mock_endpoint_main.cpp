#include <chrono>
#include <csignal>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rgs/mock_endpoint.hpp"

// Standalone wrapper around the bundled mock endpoint so the CLI can be
// driven against the remote protocols without a real model server.

namespace {
volatile std::sig_atomic_t stop_requested = 0;
void handle_signal(int) { stop_requested = 1; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic mock completion/judge endpoint"};
  rgs::MockEndpointConfig config;
  app.add_option("--commands", config.commands, "completion command pool")->delimiter(',');
  app.add_option("--thought", config.thought, "thought line text");
  app.add_option("--token-logprob", config.token_logprob, "flat per-token logprob");
  app.add_option("--judge-preference", config.judge_preference, "fixed judge answer");
  app.add_option("--judge-mode", config.judge_mode,
                 "fixed|invalid_enum|non_integer|missing_call|wrong_name|garbage_arguments");
  app.add_option("--fail-first", config.fail_first, "answer HTTP 500 to this many requests");

  try {
    app.parse(argc, argv);
    rgs::MockEndpoint endpoint(config);
    int port = endpoint.start();
    std::printf("listening on %s\n", endpoint.base_url().c_str());
    std::fflush(stdout);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!stop_requested) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    endpoint.stop();
    (void)port;
    return 0;
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
