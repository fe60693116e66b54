#include <fmt/format.h>
#include <httplib.h>

#include <charconv>

#include "blindeval/service.hpp"
#include "blindeval/text.hpp"

namespace blindeval::service {

using nlohmann::json;

namespace {

int http_status(ServiceError::Code code) {
  switch (code) {
    case ServiceError::Code::not_found: return 404;
    case ServiceError::Code::conflict: return 409;
    case ServiceError::Code::expired: return 410;
    case ServiceError::Code::bad_request: return 400;
    case ServiceError::Code::forbidden: return 403;
  }
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::size_t parse_index(const std::string& s) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ServiceError(ServiceError::Code::bad_request, "bad task index");
  }
  return value;
}

Submission parse_submission(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw ServiceError(ServiceError::Code::bad_request, "body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("postedit") || !j["postedit"].is_string()) {
    throw ServiceError(ServiceError::Code::bad_request, "'postedit' string is required");
  }
  Submission s;
  s.postedit = j["postedit"].get<std::string>();
  if (const auto it = j.find("flags"); it != j.end()) {
    if (!it->is_object()) throw ServiceError(ServiceError::Code::bad_request, "'flags' must be an object");
    for (const char* name : {"terminology", "omission", "typography"}) {
      if (it->contains(name) && !(*it)[name].is_boolean()) {
        throw ServiceError(ServiceError::Code::bad_request,
                           fmt::format("flag '{}' must be a boolean", name));
      }
    }
    s.flags.terminology = it->value("terminology", false);
    s.flags.omission = it->value("omission", false);
    s.flags.typography = it->value("typography", false);
  }
  if (const auto it = j.find("comment"); it != j.end() && it->is_string() &&
                                         !it->get<std::string>().empty()) {
    s.comment = it->get<std::string>();
  }
  if (const auto it = j.find("segment_id"); it != j.end() && it->is_string()) {
    s.segment_id = it->get<std::string>();
  }
  return s;
}

}  // namespace

struct HttpServer::Impl {
  Study& study;
  ServerOptions options;
  httplib::Server server;

  Impl(Study& s, ServerOptions o) : study(s), options(std::move(o)) { routes(); }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const ServiceError& e) {
      json body = {{"error", e.what()}};
      if (e.code() == ServiceError::Code::expired) {
        body["state"] = "expired";
        body["status"] = "late";
      }
      send_json(res, http_status(e.code()), body);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  }

  json session_body(const Session& s) {
    json j = to_json(s);
    j["instructions"] = study.config().instructions;
    j["autosave"] = study.config().autosave;
    return j;
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json j;
        try {
          j = json::parse(req.body);
        } catch (const json::parse_error&) {
          throw ServiceError(ServiceError::Code::bad_request, "body is not valid JSON");
        }
        if (!j.is_object() || !j.contains("rater_id") || !j["rater_id"].is_string()) {
          throw ServiceError(ServiceError::Code::bad_request, "'rater_id' string is required");
        }
        send_json(res, 201, session_body(study.create_session(j["rater_id"].get<std::string>())));
      });
    });

    server.Get(R"(/sessions/([0-9a-f]+)/tasks/([0-9]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto task = study.get_task(req.matches[1], parse_index(req.matches[2]));
                   send_json(res, 200, to_json(task));
                 });
               });

    server.Put(R"(/sessions/([0-9a-f]+)/tasks/([0-9]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto ack = study.submit(req.matches[1], parse_index(req.matches[2]),
                                                 parse_submission(req.body));
                   send_json(res, 200,
                             {{"status", "accepted"},
                              {"segment_id", ack.record.segment_id},
                              {"submitted_at", format_timestamp(*ack.record.submitted_at)},
                              {"cursor", ack.session.cursor},
                              {"state", std::string(to_string(ack.session.state))}});
                 });
               });

    server.Get(R"(/sessions/([0-9a-f]+)/status)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   send_json(res, 200, session_body(study.status(req.matches[1])));
                 });
               });

    server.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (options.operator_token.empty()) {
          throw ServiceError(ServiceError::Code::forbidden, "export is disabled");
        }
        if (req.get_header_value("Authorization") != "Bearer " + options.operator_token) {
          send_json(res, 401, {{"error", "operator token required"}});
          return;
        }
        std::string body;
        for (const auto& r : study.export_annotations()) body += blindeval::to_json(r).dump() + "\n";
        res.status = 200;
        res.set_content(body, "application/x-ndjson");
      });
    });

    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
  }
};

HttpServer::HttpServer(Study& study, ServerOptions options)
    : impl_(std::make_unique<Impl>(study, std::move(options))) {}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int HttpServer::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace blindeval::service
