#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "qaexpert/annotate.hpp"
#include "qaexpert/corpus.hpp"
#include "qaexpert/error.hpp"

namespace qaexpert::annotate {

struct HttpRequest {
  std::string method;  // "GET", "POST"
  std::string path;    // without query string
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  std::filesystem::path session_dir;
  std::optional<std::string> token;                           // checked against X-Annotate-Token
  std::shared_ptr<const corpus::CorpusStore> store;          // optional, supplies comment text
  std::optional<std::filesystem::path> static_dir;            // mounted at "/"
  std::function<std::int64_t()> clock;                        // epoch seconds; system clock if empty
  std::shared_ptr<const CriteriaSet> criteria;                // bundled set if empty
};

// JSON API over a SessionStore. handle() is the whole routing layer and is
// independent of the socket server, so it can be driven directly.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  HttpResponse handle(const HttpRequest& request);

  // Blocks until stop(). Port 0 picks a free port; bound_port() reports it
  // once listening.
  void serve(const std::string& host, int port);
  void stop();
  int bound_port() const;
  bool wait_until_listening(int timeout_ms) const;

  SessionStore& sessions() { return sessions_; }

 private:
  struct Server;
  std::int64_t now() const;

  ServiceOptions options_;
  SessionStore sessions_;
  std::unique_ptr<Server> server_;
  std::atomic<int> bound_port_{0};
};

int http_status(ErrorCode code);
nlohmann::json error_body(ErrorCode code, const std::string& message);

}  // namespace qaexpert::annotate
