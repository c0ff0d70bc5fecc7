// Copyright 2026 The epochwatt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON-over-HTTP front end for TrackingService, plus a small blocking client
// used by the CLI and tests. httplib stays private to the implementation.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "epochwatt/error.hpp"
#include "epochwatt/service.hpp"

namespace epochwatt {

/// 404 for not_found, 409 for invalid_state / device_unsupported, 500 for
/// spawn_failure, 400 otherwise.
int http_status(ErrorCode code) noexcept;

/// {error_code, message, detail, suggestions}
nlohmann::json error_body(const Error& error);

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  // Static assets for GET /. A placeholder page is served when unset.
  std::optional<std::filesystem::path> static_dir;
  LogFn log;
};

class HttpServer {
 public:
  HttpServer(TrackingService& service, HttpOptions options = {});
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket and updates the service's base URL. Returns the port.
  int bind();
  /// Serves on the calling thread until stop().
  void run();
  /// bind() if needed, then serve on a background thread.
  void start();
  void stop();

  int port() const noexcept { return port_; }
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  TrackingService& service_;
  HttpOptions options_;
  int port_ = -1;
};

struct HttpResponse {
  int status = 0;
  nlohmann::json body;

  bool ok() const noexcept { return status >= 200 && status < 300; }
};

/// Blocking JSON client for one service base URL (scheme://host:port).
class ServiceClient {
 public:
  explicit ServiceClient(const std::string& base_url,
                         double timeout_s = 5.0);
  ~ServiceClient();

  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  /// Throws Error{not_found} when the service cannot be reached.
  HttpResponse get(const std::string& path);
  HttpResponse post(const std::string& path,
                    const nlohmann::json& body = nlohmann::json::object());

  /// Returns the body of a 2xx response, otherwise rethrows the service's
  /// error body as an Error.
  static nlohmann::json expect_ok(const HttpResponse& response);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "http://host:port/sessions/<id>" into base URL and session id.
/// Throws validation_error for anything else.
std::pair<std::string, std::string> split_session_url(const std::string& url);

}  // namespace epochwatt
