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

#include "epochwatt/http_api.hpp"

#include <regex>
#include <thread>

#include <httplib.h>

#include "epochwatt/profile_document.hpp"

namespace epochwatt {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

constexpr ErrorCode kAllCodes[] = {
    ErrorCode::insufficient_data,  ErrorCode::malformed_stream,
    ErrorCode::domain_error,       ErrorCode::unknown_hardware,
    ErrorCode::unknown_region,     ErrorCode::inconsistent_counter,
    ErrorCode::parse_error,        ErrorCode::device_unsupported,
    ErrorCode::validation_error,   ErrorCode::unsupported_version,
    ErrorCode::invalid_state,      ErrorCode::not_found,
    ErrorCode::spawn_failure};

ErrorCode code_from_string(std::string_view s) {
  for (auto c : kAllCodes) {
    if (to_string(c) == s) return c;
  }
  return ErrorCode::validation_error;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse_error, "request body is not valid JSON",
                e.what());
  }
}

json catalog_entry(const HardwareCatalogEntry& e) {
  return {{"name", e.name},
          {"kind", to_string(e.kind)},
          {"power_draw_w", e.power_draw},
          {"flops", e.flops}};
}

constexpr const char* kPlaceholder =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>epochwatt"
    "</title></head><body><h1>epochwatt</h1><p>The web UI is not bundled "
    "with this build. Start the server with <code>--static-dir</code> to "
    "serve it. The JSON API is available under <code>/sessions</code>, "
    "<code>/profiles</code>, <code>/whatif</code> and <code>/catalog"
    "</code>.</p></body></html>";

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::invalid_state:
    case ErrorCode::device_unsupported: return 409;
    case ErrorCode::spawn_failure: return 500;
    default: return 400;
  }
}

json error_body(const Error& error) {
  return {{"error_code", to_string(error.code())},
          {"message", error.what()},
          {"detail", error.detail()},
          {"suggestions", error.suggestions()}};
}

struct HttpServer::Impl {
  httplib::Server server;
  std::jthread thread;
  bool bound = false;
};

HttpServer::HttpServer(TrackingService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>()),
      service_(service),
      options_(std::move(options)) {
  auto& svr = impl_->server;
  auto& svc = service_;

  // Wraps a handler so every library error becomes a JSON error body.
  const auto guarded = [this](auto fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        reply(res, http_status(e.code()), error_body(e));
      } catch (const json::exception& e) {
        reply(res, 400, error_body(Error(ErrorCode::validation_error,
                                         "malformed request", e.what())));
      } catch (const std::exception& e) {
        if (options_.log) options_.log(std::string("internal error: ") + e.what());
        reply(res, 500, {{"error_code", "internal"},
                         {"message", e.what()},
                         {"detail", ""}});
      }
    };
  };

  svr.Post("/sessions", guarded([&svc](const auto& req, auto& res) {
    const auto info = svc.start_session(session_request_from_json(parse_body(req)));
    reply(res, 201, {{"id", info.id},
                     {"url", info.url},
                     {"profile", to_json(svc.live_profile(info.id))}});
  }));
  svr.Post(R"(/sessions/([0-9A-Za-z]+)/epoch)",
           guarded([&svc](const auto& req, auto& res) {
             const auto rec = svc.mark_epoch(req.matches[1]);
             reply(res, 200, {{"epoch", to_json(rec)}});
           }));
  svr.Post(R"(/sessions/([0-9A-Za-z]+)/(pause|resume|halt))",
           guarded([&svc](const auto& req, auto& res) {
             const std::string id = req.matches[1];
             const std::string action = req.matches[2];
             SessionState state;
             if (action == "pause") {
               state = svc.pause_session(id);
             } else if (action == "resume") {
               state = svc.resume_session(id);
             } else {
               const auto body = parse_body(req);
               state = svc.halt_session(id, body.value("close_epoch", false));
             }
             reply(res, 200, {{"id", id},
                              {"state", to_string(state)},
                              {"profile", to_json(svc.live_profile(id))}});
           }));
  svr.Get(R"(/sessions/([0-9A-Za-z]+)/profile)",
          guarded([&svc](const auto& req, auto& res) {
            reply(res, 200, to_json(svc.live_profile(req.matches[1])));
          }));
  svr.Get("/profiles", guarded([&svc](const auto&, auto& res) {
    json list = json::array();
    for (const auto& s : svc.list_profiles()) list.push_back(to_json(s));
    reply(res, 200, {{"profiles", list}});
  }));
  svr.Post("/profiles", guarded([&svc](const auto& req, auto& res) {
    const auto id = svc.import_profile(parse_body(req));
    reply(res, 201, {{"id", id}});
  }));
  svr.Get(R"(/profiles/([0-9A-Za-z]+)/export)",
          guarded([&svc](const auto& req, auto& res) {
            reply(res, 200, to_document(svc.export_profile(req.matches[1])));
          }));
  svr.Post("/whatif", guarded([&svc](const auto& req, auto& res) {
    reply(res, 200, to_json(svc.what_if(what_if_request_from_json(parse_body(req)))));
  }));
  svr.Get("/catalog/hardware", guarded([&svc](const auto& req, auto& res) {
    const auto q = canonical_name(req.get_param_value("q"));
    json entries = json::array();
    for (const auto& e : svc.hardware().entries()) {
      if (q.empty() || canonical_name(e.name).find(q) != std::string::npos) {
        entries.push_back(catalog_entry(e));
      }
    }
    reply(res, 200, {{"entries", entries}});
  }));
  svr.Get("/catalog/intensity", guarded([&svc](const auto&, auto& res) {
    json rows = json::array();
    for (const auto& r : svc.intensities().rows()) {
      rows.push_back({{"region_code", r.region_code},
                      {"intensity_lbs_per_kwh", r.intensity}});
    }
    reply(res, 200, {{"vintage", svc.intensities().vintage()},
                     {"regions", rows},
                     {"gaps", svc.intensities().gaps()}});
  }));
  svr.Get("/health", guarded([&svc](const auto&, auto& res) {
    reply(res, 200, {{"status", "ok"},
                     {"profiles", svc.list_profiles().size()},
                     {"hardware_entries", svc.hardware().size()},
                     {"intensity_vintage", svc.intensities().vintage()}});
  }));

  if (options_.static_dir && std::filesystem::is_directory(*options_.static_dir)) {
    svr.set_mount_point("/", options_.static_dir->string());
  } else {
    svr.Get("/", [](const auto&, auto& res) {
      res.set_content(kPlaceholder, "text/html; charset=utf-8");
    });
  }
  svr.set_error_handler([](const auto& req, auto& res) {
    if (!res.body.empty()) return;
    const auto code = res.status == 404 ? ErrorCode::not_found
                                        : ErrorCode::validation_error;
    reply(res, res.status,
          error_body(Error(code, "no such route", req.method + " " + req.path)));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (impl_->bound) return port_;
  auto& svr = impl_->server;
  if (options_.port == 0) {
    port_ = svr.bind_to_any_port(options_.host);
  } else {
    port_ = svr.bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::validation_error, "could not bind listening socket",
                options_.host + ":" + std::to_string(options_.port));
  }
  impl_->bound = true;
  service_.set_base_url(url());
  return port_;
}

void HttpServer::run() {
  bind();
  impl_->server.listen_after_bind();
}

void HttpServer::start() {
  bind();
  impl_->thread = std::jthread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string HttpServer::url() const {
  return "http://" + options_.host + ":" + std::to_string(port_);
}

// ---------------------------------------------------------------------------

struct ServiceClient::Impl {
  std::string base;
  httplib::Client client;
  explicit Impl(const std::string& url) : base(url), client(url) {}

  HttpResponse convert(const httplib::Result& r, const std::string& path) {
    if (!r) {
      throw Error(ErrorCode::not_found, "tracking service unreachable",
                  base + path + " (" + httplib::to_string(r.error()) + ")",
                  {"start one with `epochwatt serve` or pass --service-url"});
    }
    HttpResponse out;
    out.status = r->status;
    out.body = r->body.empty() ? json(nullptr)
                               : json::parse(r->body, nullptr, false);
    if (out.body.is_discarded()) out.body = r->body;
    return out;
  }
};

ServiceClient::ServiceClient(const std::string& base_url, double timeout_s)
    : impl_(std::make_unique<Impl>(base_url)) {
  const auto usec = static_cast<time_t>(timeout_s * 1e6);
  impl_->client.set_connection_timeout(usec / 1000000, usec % 1000000);
  impl_->client.set_read_timeout(usec / 1000000, usec % 1000000);
  impl_->client.set_write_timeout(usec / 1000000, usec % 1000000);
}

ServiceClient::~ServiceClient() = default;

HttpResponse ServiceClient::get(const std::string& path) {
  return impl_->convert(impl_->client.Get(path), path);
}

HttpResponse ServiceClient::post(const std::string& path, const json& body) {
  return impl_->convert(impl_->client.Post(path, body.dump(), kJson), path);
}

json ServiceClient::expect_ok(const HttpResponse& response) {
  if (response.ok()) return response.body;
  const auto& b = response.body;
  if (!b.is_object() || !b.contains("error_code")) {
    throw Error(ErrorCode::validation_error,
                "service returned HTTP " + std::to_string(response.status),
                b.is_string() ? b.get<std::string>() : b.dump());
  }
  std::vector<std::string> suggestions;
  if (b.contains("suggestions") && b["suggestions"].is_array()) {
    suggestions = b["suggestions"].get<std::vector<std::string>>();
  }
  throw Error(code_from_string(b.value("error_code", "")),
              b.value("message", "service error"), b.value("detail", ""),
              std::move(suggestions));
}

std::pair<std::string, std::string> split_session_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)/sessions/([0-9A-Za-z]+)/?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::validation_error,
                "expected a session URL like http://host:port/sessions/<id>",
                url);
  }
  return {m[1], m[2]};
}

}  // namespace epochwatt
