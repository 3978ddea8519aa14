#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/encoder.hpp"
#include "molpla/retrieval.hpp"

namespace molpla {

// key=value lines; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Command-line entry point. Exit codes: 0 success, 1 usage error, 2 data
// error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// JSON API over a loaded model and library. handle() is usable without a
// socket; serve() binds an HTTP listener.
class ApiService {
 public:
  ApiService(Model model, RGroupLibrary library, std::string checkpoint_hash, std::string library_hash);

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::string& session = "default");

  // Blocks until stop() is called. Returns false if binding failed.
  bool serve(const std::string& host, int port);
  // Binds to an ephemeral port and returns it (-1 on failure); call
  // serve_bound() afterwards.
  int bind_any(const std::string& host);
  bool serve_bound();
  void stop();

  nlohmann::json session_history(const std::string& session) const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace molpla
