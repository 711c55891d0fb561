#include "qaexpert/annotate_service.hpp"

#include <httplib.h>

#include <chrono>
#include <regex>
#include <thread>

#include "qaexpert/assets.hpp"

namespace qaexpert::annotate {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kUnauthorized: return 401;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kPrecondition: return 422;
    default: return 500;
  }
}

json error_body(ErrorCode code, const std::string& message) {
  return json{{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
}

struct AnnotationService::Server {
  httplib::Server http;
};

namespace {

HttpResponse reply(int status, const json& body) { return HttpResponse{status, "application/json", body.dump()}; }

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  require(!j.is_discarded() && j.is_object(), ErrorCode::kInvalidArgument, "request body must be a JSON object");
  return j;
}

template <typename T>
T field(const json& body, const char* name) {
  auto it = body.find(name);
  require(it != body.end(), ErrorCode::kInvalidArgument, std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kInvalidArgument, std::string("field '") + name + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& body, const char* name, T fallback) {
  return body.contains(name) ? field<T>(body, name) : fallback;
}

std::set<Label> parse_classes(const json& body) {
  std::set<Label> out;
  for (const auto& name : field<std::vector<std::string>>(body, "classes")) out.insert(parse_label_or_throw(name));
  return out;
}

}  // namespace

AnnotationService::AnnotationService(ServiceOptions options)
    : options_(std::move(options)), sessions_(options_.session_dir), server_(std::make_unique<Server>()) {
  if (!options_.criteria) options_.criteria = std::shared_ptr<const CriteriaSet>(&CriteriaSet::bundled(), [](auto*) {});
}

AnnotationService::~AnnotationService() { stop(); }

std::int64_t AnnotationService::now() const {
  if (options_.clock) return options_.clock();
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

HttpResponse AnnotationService::handle(const HttpRequest& request) {
  static const std::regex session_route(R"(^/sessions/([A-Za-z0-9_-]+)(/.*)?$)");
  try {
    const std::string& m = request.method;
    if (request.path == "/criteria") {
      require(m == "GET", ErrorCode::kInvalidArgument, "use GET for /criteria");
      if (options_.criteria.get() == &CriteriaSet::bundled()) {
        return HttpResponse{200, "application/json", std::string(assets::raw("criteria.json"))};
      }
      json out{{"version", options_.criteria->version}, {"expert_minimum", options_.criteria->expert_minimum}};
      json list = json::array();
      for (const auto& c : options_.criteria->criteria) {
        list.push_back({{"id", c.id}, {"class", std::string(to_string(c.label))}, {"text", c.text}, {"group", c.group}});
      }
      out["criteria"] = list;
      return reply(200, out);
    }
    if (request.path == "/health") return reply(200, json{{"status", "ok"}});

    if (options_.token) {
      auto it = request.headers.find("x-annotate-token");
      require(it != request.headers.end() && it->second == *options_.token, ErrorCode::kUnauthorized,
              "missing or wrong X-Annotate-Token");
    }

    if (request.path == "/sessions") {
      if (m == "GET") {
        json list = json::array();
        for (const auto& id : sessions_.ids()) list.push_back(sessions_.get(id)->summary());
        return reply(200, json{{"sessions", list}});
      }
      require(m == "POST", ErrorCode::kInvalidArgument, "use GET or POST for /sessions");
      const json body = parse_body(request.body);
      const auto coders = field<std::vector<std::string>>(body, "coders");
      require(coders.size() == 2, ErrorCode::kInvalidArgument, "'coders' must list exactly two identities");
      SessionConfig config;
      config.warmup_size = field_or<std::size_t>(body, "warmup_size", config.warmup_size);
      config.round_size = field_or<std::size_t>(body, "round_size", config.round_size);
      config.kappa_gate = field_or<double>(body, "kappa_gate", config.kappa_gate);
      config.bulk_overlap = field_or<double>(body, "bulk_overlap", config.bulk_overlap);
      config.seed = field_or<std::uint64_t>(body, "seed", config.seed);
      std::optional<std::string> id;
      if (body.contains("id")) id = field<std::string>(body, "id");
      auto session = sessions_.create(id, field<std::vector<std::string>>(body, "sample"), coders[0], coders[1],
                                      config, now());
      return reply(201, session->summary());
    }

    std::smatch match;
    if (!std::regex_match(request.path, match, session_route)) {
      fail(ErrorCode::kNotFound, "no route for " + request.path);
    }
    const std::string id = match[1].str();
    const std::string sub = match[2].str();

    if (sub.empty() && m == "GET") return reply(200, sessions_.get(id)->summary());
    if (sub == "/agreement" && m == "GET") return reply(200, sessions_.get(id)->agreement_json());
    if (sub == "/export" && m == "GET") {
      auto session = sessions_.get(id);
      json labels = json::array();
      for (const auto& rec : session->export_labels()) labels.push_back(Session::to_json(rec));
      return reply(200, json{{"session", id}, {"count", labels.size()}, {"labels", labels}});
    }
    if (sub == "/next" && m == "GET") {
      auto q = request.query.find("coder");
      require(q != request.query.end() && !q->second.empty(), ErrorCode::kInvalidArgument,
              "query parameter 'coder' is required");
      auto session = sessions_.get(id);
      const auto next = session->next_item(q->second);
      json out{{"session", id}, {"state", std::string(to_string(session->state()))}};
      if (!next) {
        out["comment_id"] = nullptr;
        return reply(200, out);
      }
      out["comment_id"] = *next;
      out["round"] = session->rounds().back().index;
      if (options_.store) {
        if (const auto* c = options_.store->find_comment(*next)) {
          json comment{{"id", c->id}, {"author", c->author}, {"body", c->body}, {"created_utc", c->created_utc}};
          if (const auto* p = options_.store->find_post(c->post_id)) {
            comment["post"] = json{{"id", p->id}, {"title", p->title}, {"body", p->body}};
          }
          out["comment"] = comment;
        }
      }
      return reply(200, out);
    }
    if (sub == "/labels" && m == "POST") {
      const json body = parse_body(request.body);
      const auto coder = field<std::string>(body, "coder");
      const auto comment = field<std::string>(body, "comment_id");
      EvidenceSet evidence{parse_classes(body), field_or<std::vector<std::string>>(body, "criteria", {})};
      const auto at = now();
      const Label label = sessions_.mutate(id, [&](Session& s) {
        return s.submit_label(coder, comment, evidence, at, *options_.criteria);
      });
      return reply(201, json{{"comment_id", comment}, {"coder", coder}, {"label", std::string(to_string(label))}});
    }
    if (sub == "/rounds/close" && m == "POST") {
      const auto at = now();
      const Round round = sessions_.mutate(id, [&](Session& s) { return s.close_round(at); });
      auto session = sessions_.get(id);
      json out{{"index", round.index},
               {"bulk", round.bulk},
               {"n_items", round.ids.size()},
               {"kappa", round.agreement ? json(round.agreement->kappa) : json(nullptr)},
               {"gate_passed", session->gate_passed()},
               {"state", std::string(to_string(session->state()))}};
      return reply(200, out);
    }
    if (sub == "/adjudications" && m == "POST") {
      const json body = parse_body(request.body);
      const auto comment = field<std::string>(body, "comment_id");
      const Label label = parse_label_or_throw(field<std::string>(body, "label"));
      const auto note = field_or<std::string>(body, "note", "");
      const auto by = field_or<std::string>(body, "by", "");
      const auto at = now();
      sessions_.mutate(id, [&](Session& s) { return s.adjudicate(comment, label, note, by, at); });
      auto session = sessions_.get(id);
      return reply(201, json{{"comment_id", comment},
                             {"label", std::string(to_string(label))},
                             {"state", std::string(to_string(session->state()))}});
    }
    fail(ErrorCode::kNotFound, "no route for " + m + " " + request.path);
  } catch (const Error& e) {
    return reply(http_status(e.code()), error_body(e.code(), e.what()));
  } catch (const std::exception& e) {
    return reply(500, error_body(ErrorCode::kInternal, e.what()));
  }
}

void AnnotationService::serve(const std::string& host, int port) {
  auto& http = server_->http;
  auto adapter = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request;
    request.method = req.method;
    request.path = req.path;
    request.body = req.body;
    for (const auto& [k, v] : req.params) request.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) {
      std::string key = k;
      for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      request.headers.emplace(key, v);
    }
    const HttpResponse response = handle(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  for (const char* pattern : {"/criteria", "/health", "/sessions", R"(/sessions/.*)"}) {
    http.Get(pattern, adapter);
    http.Post(pattern, adapter);
  }
  if (options_.static_dir) {
    require(http.set_mount_point("/", options_.static_dir->string()), ErrorCode::kIo,
            "cannot serve static files from " + options_.static_dir->string());
  }
  if (port == 0) {
    port = http.bind_to_any_port(host);
  } else {
    require(http.bind_to_port(host, port), ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  require(port > 0, ErrorCode::kIo, "cannot bind " + host);
  bound_port_ = port;
  http.listen_after_bind();
}

void AnnotationService::stop() { server_->http.stop(); }

int AnnotationService::bound_port() const { return bound_port_; }

bool AnnotationService::wait_until_listening(int timeout_ms) const {
  for (int waited = 0; waited < timeout_ms; waited += 10) {
    if (server_->http.is_running()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return server_->http.is_running();
}

}  // namespace qaexpert::annotate
