#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "ami/core/error.hpp"
#include "ami/pipeline/engine.hpp"
#include "json.hpp"

namespace ami::service {

enum class ApiCode { not_found, invalid_input, conflict, backend_failure };
std::string_view to_string(ApiCode code);
int http_status(ApiCode code);
/// Maps engine exceptions onto the API's error codes.
ApiCode api_code(ErrorKind kind);
nlohmann::json error_body(ApiCode code, const std::string& message, const nlohmann::json& detail = nullptr);

inline constexpr std::size_t kMaxPageSize = 500;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path crops_dir;  // defaults to <home>/crops
  std::chrono::milliseconds event_poll{250};
};

/// JSON-over-HTTP front end of an Engine. Mutations go through the same
/// engine calls as the CLI.
class Service {
 public:
  Service(pipeline::Engine& engine, ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and returns the port actually bound.
  int bind();
  /// Serves until stop(); call bind() first.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ami::service
