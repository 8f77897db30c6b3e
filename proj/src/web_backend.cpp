#include "hacluster/web_backend.hpp"

#include "hacluster/protocol.hpp"
#include "hacluster/virtual_endpoint.hpp"

namespace hacluster {

std::optional<std::string> document_path(std::string_view request_path) {
  std::string_view p = request_path.substr(0, request_path.find('?'));
  if (p.empty() || p.front() != '/') return std::nullopt;
  if (p == "/") return std::string("/index.html");
  if (p.back() == '/') return std::string(p) + "index.html";
  if (!is_normalized_absolute(p)) return std::nullopt;
  return std::string(p);
}

WebBackend::WebBackend(Fabric& fabric, const std::string& id, Options options)
    : Actor(fabric, id), options_(std::move(options)) {}

WebBackend::~WebBackend() { detach(); }

void WebBackend::boot() { attach(); }

http::Response WebBackend::respond(int status, std::string body) const {
  auto resp = http::make_response(status, std::move(body));
  http::set_header(resp.headers, "Server", std::string(kWebServerId));
  http::set_header(resp.headers, "X-Backend", name());
  if (status == 200) http::set_header(resp.headers, "Content-Type", "text/html");
  return resp;
}

void WebBackend::on_message(const Envelope& e) {
  if (!wire::is_http(e.body)) return;
  if (!alive_) {
    reply(e, std::string(wire::kRefused), e.epoch);
    return;
  }
  auto req = wire::parse_http_request(e.body);
  if (!req) {
    reply(e, http::serialize(respond(400, {})), e.epoch);
    return;
  }
  serve(e, std::move(*req));
}

void WebBackend::serve(const Envelope& e, http::Request req) {
  const bool head = req.method == "HEAD";
  auto finish = [this, e, head](http::Response resp) {
    resp.head_only = head;
    reply(e, http::serialize(resp), e.epoch);
  };
  if (req.method != "GET" && req.method != "HEAD" && req.method != "POST") {
    finish(respond(405, {}));
    return;
  }
  const std::string path = req.path.substr(0, req.path.find('?'));
  if (path == "/info") {
    // Templated page: who served it and which store epoch it was mounted at.
    if (!binding_) {
      mount([this, finish](bool ok) {
        if (!ok) return finish(respond(503, {}));
        finish(respond(200, "<html><body>node=" + name() + " epoch=" +
                                std::to_string(binding_->server_epoch) + "</body></html>\n"));
      });
      return;
    }
    finish(respond(200, "<html><body>node=" + name() + " epoch=" +
                            std::to_string(binding_->server_epoch) + "</body></html>\n"));
    return;
  }
  auto doc = document_path(path);
  if (!doc) {
    finish(respond(404, {}));
    return;
  }
  read(*doc, false, [this, finish](std::optional<std::string> bytes, int status) {
    if (!bytes) return finish(respond(status, {}));
    finish(respond(200, std::move(*bytes)));
  });
}

void WebBackend::read(const std::string& path, bool retried, ReadDone done) {
  auto attempt = [this, path, retried, done] {
    send_store(store_wire::read(binding_->token(), path),
               [this, path, retried, done](std::optional<StoreReply> r) {
                 if (r && r->ok) {
                   auto nl = r->payload.find('\n');
                   done(nl == std::string::npos ? std::string() : r->payload.substr(nl + 1), 200);
                   return;
                 }
                 if (r && r->error == Errc::NotFound) return done(std::nullopt, 404);
                 if (r && r->error == Errc::AccessDenied) return done(std::nullopt, 403);
                 // Stale binding or silent store: remount once, then give up.
                 binding_.reset();
                 if (retried) return done(std::nullopt, 503);
                 read(path, true, done);
               });
  };
  if (binding_) {
    attempt();
    return;
  }
  mount([this, attempt, retried, path, done](bool ok) {
    if (ok) return attempt();
    if (retried) return done(std::nullopt, 503);
    read(path, true, done);
  });
}

void WebBackend::mount(std::function<void(bool)> done) {
  auto do_mount = [this, done](std::string target, std::uint64_t stamp) {
    store_target_ = target;
    store_stamp_ = stamp;
    send_store(store_wire::mount(hostname(), options_.export_path),
               [this, done](std::optional<StoreReply> r) {
                 if (!r || !r->ok) return done(false);
                 auto token = MountToken::parse(trim(r->payload));
                 if (!token) return done(false);
                 binding_ = MountBinding{token->client, token->export_path, token->epoch,
                                         BindingStatus::Attached};
                 done(true);
               });
  };
  if (!options_.store_node.empty()) {
    do_mount(options_.store_node, 0);
    return;
  }
  call(std::string(kRegistryEndpoint), vip_wire::resolve(options_.vip), options_.registry_timeout,
       [do_mount, done](std::optional<Envelope> r) {
         if (!r) return done(false);
         auto owner = vip_wire::parse_owner(r->body);
         if (!owner) return done(false);
         do_mount(owner->owner, owner->epoch);
       });
}

void WebBackend::send_store(std::string body, std::function<void(std::optional<StoreReply>)> done) {
  call(store_target_, std::move(body), options_.store_timeout,
       [done](std::optional<Envelope> r) {
         if (!r) return done(std::nullopt);
         done(StoreReply::parse(r->body));
       },
       store_stamp_);
}

}  // namespace hacluster
