#include "hacluster/client.hpp"

#include <memory>

#include "hacluster/balancer.hpp"
#include "hacluster/config.hpp"
#include "hacluster/protocol.hpp"
#include "hacluster/shared_store.hpp"

namespace hacluster {

namespace {
bool is_set_cookie(std::string_view name) { return iequals(name, "Set-Cookie"); }
}  // namespace

std::optional<std::string> Outcome::server_id() const {
  if (!response) return std::nullopt;
  for (const auto& [k, v] : response->headers) {
    if (!is_set_cookie(k)) continue;
    const std::string prefix = std::string(kServerIdCookie) + "=";
    if (!v.starts_with(prefix)) continue;
    auto end = v.find(';');
    return v.substr(prefix.size(), end == std::string::npos ? std::string::npos
                                                            : end - prefix.size());
  }
  return std::nullopt;
}

std::size_t Outcome::set_cookie_count() const {
  if (!response) return 0;
  return http::count_header(response->headers, "Set-Cookie");
}

void BenchResult::add(const Outcome& o) {
  ++total;
  statuses.push_back(o.response ? o.response->status : 0);
  set_cookie_counts.push_back(o.set_cookie_count());
  auto id = o.server_id();
  if (o.ok() && id) {
    ++per_backend[*id];
    serverid_sequence.push_back(*id);
  } else {
    ++errors;
  }
}

std::string BenchResult::to_text() const {
  std::string out = "total=" + std::to_string(total) + "\n";
  out += "errors=" + std::to_string(errors) + "\n";
  for (const auto& [id, n] : per_backend) out += "backend." + id + "=" + std::to_string(n) + "\n";
  std::string seq;
  for (const auto& id : serverid_sequence) seq += (seq.empty() ? "" : ",") + id;
  out += "sequence=" + seq + "\n";
  if (failover_time) out += "failover_ms=" + std::to_string(failover_time->count()) + "\n";
  return out;
}

Client::Client(Fabric& fabric, const std::string& name, Options options)
    : Actor(fabric, name, EndpointClass::Infrastructure), options_(std::move(options)) {
  attach();
}

Client::~Client() { detach(); }

void Client::resolve(std::function<void(std::optional<Resolution>)> done) {
  if (cached_ && now() < cached_until_) {
    done(cached_);
    return;
  }
  call(std::string(kRegistryEndpoint), vip_wire::resolve(options_.vip), options_.registry_timeout,
       [this, done](std::optional<Envelope> r) {
         std::optional<Resolution> res;
         if (r) res = vip_wire::parse_owner(r->body);
         if (res) {
           cached_ = res;
           cached_until_ = now() + options_.resolve_ttl;
           backoff_.reset();
         }
         done(res);
       });
}

void Client::request(http::Request req, Done done) { send_http(std::move(req), false, now(), done); }

void Client::send_http(http::Request req, bool retried, Millis sent, Done done) {
  resolve([this, req = std::move(req), retried, sent, done](std::optional<Resolution> res) mutable {
    if (!res) {
      Outcome o;
      o.sent = sent;
      o.received = now();
      done(std::move(o));
      return;
    }
    const bool head = req.method == "HEAD";
    const std::string body = wire::http_request(req);
    call(res->owner, body, options_.request_timeout,
         [this, req = std::move(req), retried, sent, done, res, head](
             std::optional<Envelope> r) mutable {
           if (r && r->body == wire::kRefused) {
             // Connection refused: the address moved; look it up again once.
             cached_.reset();
             if (!retried) return send_http(std::move(req), true, sent, done);
           }
           Outcome o;
           o.sent = sent;
           o.received = now();
           if (!r) {
             cached_.reset();
           } else if (r->body != wire::kRefused) {
             o.response = http::parse_response(r->body, head);
             o.origin = r->from;
             o.epoch = r->epoch;
           }
           done(std::move(o));
         },
         res->epoch);
  });
}

void Client::bench(int n, bool reuse_cookie, std::function<void(BenchResult)> done) {
  bench_step(n, reuse_cookie, std::make_shared<BenchResult>(), std::nullopt, std::move(done));
}

void Client::bench_step(int left, bool reuse_cookie, std::shared_ptr<BenchResult> acc,
                        std::optional<std::string> cookie, std::function<void(BenchResult)> done) {
  if (left <= 0) {
    done(*acc);
    return;
  }
  http::Request req;
  req.method = "HEAD";
  req.path = "/";
  if (reuse_cookie && cookie)
    req.headers.emplace_back("Cookie", std::string(kServerIdCookie) + "=" + *cookie);
  request(std::move(req), [this, left, reuse_cookie, acc, cookie, done](Outcome o) mutable {
    acc->add(o);
    if (!cookie && o.ok()) cookie = o.server_id();
    const Millis pause = o.ok() ? Millis(0) : backoff_.next();
    after(pause, [this, left, reuse_cookie, acc, cookie, done] {
      bench_step(left - 1, reuse_cookie, acc, cookie, done);
    });
  });
}

void Client::store_write(const std::string& path, const std::string& bytes,
                         std::function<void(bool)> done) {
  auto write = [this, path, bytes, done](std::string target, std::uint64_t stamp) {
    call(target, store_wire::mount(name() + ".example.com", "/nfs"), options_.store_timeout,
         [this, target, stamp, path, bytes, done](std::optional<Envelope> r) {
           if (!r) return done(false);
           auto reply = StoreReply::parse(r->body);
           auto token = reply.ok ? MountToken::parse(trim(reply.payload)) : std::nullopt;
           if (!token) return done(false);
           call(target, store_wire::write(*token, path, bytes), options_.store_timeout,
                [done](std::optional<Envelope> w) {
                  done(w && StoreReply::parse(w->body).ok);
                },
                stamp);
         },
         stamp);
  };
  if (!options_.store_node.empty()) {
    write(options_.store_node, 0);
    return;
  }
  cached_.reset();
  resolve([write, done](std::optional<Resolution> res) {
    if (!res) return done(false);
    write(res->owner, res->epoch);
  });
}

void Client::ask(const std::string& to, std::string body, Millis timeout,
                 std::function<void(std::optional<std::string>)> done) {
  call(to, std::move(body), timeout, [done](std::optional<Envelope> r) {
    if (!r) return done(std::nullopt);
    done(r->body);
  });
}

}  // namespace hacluster
