#include <thread>

#include "cuflinks/error.hpp"
#include "cuflinks/minid.hpp"
#include "http_util.hpp"
#include "minid_json.hpp"

namespace cuflinks::minid {

using nlohmann::json;

// ---- server ----------------------------------------------------------------

struct RegistryServer::Impl {
  Registry& registry;
  std::optional<std::string> token;
  httplib::Server server;
  std::thread thread;

  Impl(Registry& r, std::optional<std::string> t) : registry(r), token(std::move(t)) {}

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, std::string_view kind, const std::string& what) {
    reply(res, status, json{{"error", what}, {"kind", kind}});
  }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const IdentifierSyntaxError& e) {
      fail(res, 400, "syntax", e.what());
    } catch (const ArgumentError& e) {
      fail(res, 400, "argument", e.what());
    } catch (const json::exception& e) {
      fail(res, 400, "argument", e.what());
    } catch (const NotFoundError& e) {
      fail(res, 404, "not-found", e.what());
    } catch (const CycleError& e) {
      fail(res, 409, "cycle", e.what());
    } catch (const ConflictError& e) {
      fail(res, 409, "conflict", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) {
    if (!token || req.get_header_value("Authorization") == "Bearer " + *token) return true;
    fail(res, 401, "unauthorized", "missing or wrong bearer token");
    return false;
  }

  void routes() {
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, json{{"status", "ok"}, {"records", registry.size()}});
    });
    server.Post("/minid", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      guarded(res, [&] {
        json body = json::parse(req.body);
        MintRequest r;
        r.author = body.value("author", "");
        r.title = body.value("title", "");
        r.locations = body.at("locations").get<std::vector<std::string>>();
        r.checksum = detail::checksum_from(body.at("checksum"));
        reply(res, 201, detail::record_json(registry.mint(r)));
      });
    });
    server.Get("/minid/([^/]+)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        Minid m = registry.resolve(std::string(kPrefix) + req.matches[1].str());
        reply(res, m.status.kind == Status::Kind::tombstoned ? 410 : 200, detail::record_json(m));
      });
    });
    server.Patch("/minid/([^/]+)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      guarded(res, [&] {
        std::string id = std::string(kPrefix) + req.matches[1].str();
        json body = json::parse(req.body);
        std::string actor = body.value("actor", "");
        Minid m;
        if (body.contains("status")) {
          if (body.at("status") != "tombstoned") throw ArgumentError("only status \"tombstoned\" can be set");
          m = registry.tombstone(id, actor);
        } else if (body.contains("superseded_by")) {
          m = registry.supersede(id, body.at("superseded_by").get<std::string>(), actor);
        } else {
          m = registry.update_locations(id, body.value("add", std::vector<std::string>{}),
                                        body.value("remove", std::vector<std::string>{}), actor);
        }
        reply(res, 200, detail::record_json(m));
      });
    });
  }
};

RegistryServer::RegistryServer(Registry& registry, std::optional<std::string> token)
    : impl_(std::make_unique<Impl>(registry, std::move(token))) {
  impl_->routes();
}

RegistryServer::~RegistryServer() { stop(); }

int RegistryServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("", "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void RegistryServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw IoError("", "cannot listen on " + host + ":" + std::to_string(port));
}

void RegistryServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

// ---- client ----------------------------------------------------------------

namespace {

[[noreturn]] void raise(int status, const std::string& body) {
  std::string kind, what = "HTTP " + std::to_string(status);
  try {
    json j = json::parse(body);
    kind = j.value("kind", "");
    what = j.value("error", what);
  } catch (const json::exception&) {
  }
  if (kind == "syntax") throw IdentifierSyntaxError(what);
  if (kind == "not-found" || status == 404) throw NotFoundError(what);
  if (kind == "cycle") throw CycleError(what, {});
  if (kind == "conflict" || status == 409) throw ConflictError(what);
  if (kind == "argument" || status == 400) throw ArgumentError(what);
  if (status == 401 || status == 403) throw ConfigError("registry refused the request: " + what);
  throw TransferError("registry error: " + what, cuflinks::detail::is_transient_status(status));
}

}  // namespace

HttpClient::HttpClient(std::string base, std::optional<std::string> token, std::chrono::seconds timeout)
    : base_(std::move(base)), token_(std::move(token)), timeout_(timeout) {
  while (!base_.empty() && base_.back() == '/') base_.pop_back();
  cuflinks::detail::split_url(base_);
}

namespace {

Minid call(const std::string& url, const std::string& method, const std::optional<std::string>& token,
           std::chrono::seconds timeout, const std::string& body = "") {
  auto parts = cuflinks::detail::split_url(url);
  auto client = cuflinks::detail::make_client(parts.origin, timeout);
  httplib::Headers headers{{"User-Agent", std::string("cuflinks/") + CUFLINKS_VERSION}};
  if (token) headers.emplace("Authorization", "Bearer " + *token);
  httplib::Result res = method == "GET"    ? client->Get(parts.target, headers)
                        : method == "POST" ? client->Post(parts.target, headers, body, "application/json")
                                           : client->Patch(parts.target, headers, body, "application/json");
  if (!res) throw TransferError(method + " " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200 && res->status != 201 && res->status != 410) raise(res->status, res->body);
  try {
    return detail::record_from(json::parse(res->body));
  } catch (const json::exception& e) {
    throw TransferError(std::string("registry sent a malformed record: ") + e.what(), false);
  }
}

}  // namespace

Minid HttpClient::mint(const MintRequest& r) {
  detail::check_mint_request(r);
  json body{{"author", r.author},
            {"title", r.title},
            {"locations", r.locations},
            {"checksum", {{"algorithm", algorithm_name(r.checksum.algorithm)}, {"digest", r.checksum.digest}}}};
  return call(base_, "POST", token_, timeout_, body.dump());
}

Minid HttpClient::resolve(std::string_view identifier) {
  return call(base_ + "/" + parse_identifier(identifier).suffix, "GET", token_, timeout_);
}

Minid HttpClient::update_locations(std::string_view identifier, const std::vector<std::string>& add,
                                   const std::vector<std::string>& remove, const std::string& actor) {
  json body{{"add", add}, {"remove", remove}, {"actor", actor}};
  return call(base_ + "/" + parse_identifier(identifier).suffix, "PATCH", token_, timeout_, body.dump());
}

Minid HttpClient::tombstone(std::string_view identifier, const std::string& actor) {
  json body{{"status", "tombstoned"}, {"actor", actor}};
  return call(base_ + "/" + parse_identifier(identifier).suffix, "PATCH", token_, timeout_, body.dump());
}

Minid HttpClient::supersede(std::string_view identifier, const std::string& by, const std::string& actor) {
  json body{{"superseded_by", by}, {"actor", actor}};
  return call(base_ + "/" + parse_identifier(identifier).suffix, "PATCH", token_, timeout_, body.dump());
}

}  // namespace cuflinks::minid
