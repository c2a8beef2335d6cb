#include <iostream>

#include <CLI11.hpp>

#include "stub_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Canned OpenAI-compatible endpoint for demos and tests"};
  std::string host = "127.0.0.1";
  int port = 8089;
  std::string answers;
  int latency_ms = 0;
  app.add_option("--host", host, "Listen address");
  app.add_option("--port", port, "Listen port (0 picks one)");
  app.add_option("--answers", answers, "Answers JSON file");
  app.add_option("--latency-ms", latency_ms, "Delay added to every chat response");
  CLI11_PARSE(app, argc, argv);

  try {
    rusgroup::stub::StubConfig cfg =
        answers.empty() ? rusgroup::stub::StubConfig{} : rusgroup::stub::StubConfig::load(answers);
    cfg.host = host;
    cfg.port = port;
    if (latency_ms > 0) cfg.latency = std::chrono::milliseconds(latency_ms);
    rusgroup::stub::StubServer server(cfg);
    std::cout << "serving on http://" << host << ":" << port << std::endl;
    server.run();
  } catch (const std::exception& e) {
    std::cerr << "rusgroup-stub: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
