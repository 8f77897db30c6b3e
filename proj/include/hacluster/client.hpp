#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hacluster/actor.hpp"
#include "hacluster/http.hpp"
#include "hacluster/virtual_endpoint.hpp"

namespace hacluster {

/// What one client request came back with.
struct Outcome {
  std::optional<http::Response> response;  // nullopt: timeout or refused
  std::string origin;                      // node that answered on the vip
  std::uint64_t epoch = 0;                 // stamp of the answer
  Millis sent{0};
  Millis received{0};

  bool ok() const { return response && response->status == 200; }
  std::optional<std::string> server_id() const;
  std::size_t set_cookie_count() const;
};

struct BenchResult {
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> per_backend;
  std::uint64_t errors = 0;
  std::vector<std::string> serverid_sequence;
  std::vector<int> statuses;
  std::vector<std::size_t> set_cookie_counts;
  std::optional<Millis> failover_time;

  void add(const Outcome& o);
  /// One `key=value` line per field, for scripts.
  std::string to_text() const;
};

/// A browser/cURL stand-in that reaches the service through the vip.
class Client final : public Actor {
 public:
  struct Options {
    std::string vip;
    Millis request_timeout{2000};
    Millis registry_timeout{500};
    Millis store_timeout{300};
    // How long a resolution is trusted (an ARP cache entry).
    Millis resolve_ttl{1000};
    // Three-tier: admin writes go straight to this store node.
    std::string store_node;
  };
  using Done = std::function<void(Outcome)>;

  Client(Fabric& fabric, const std::string& name, Options options);
  ~Client() override;

  void request(http::Request req, Done done);

  /// Sequential HEAD / requests; replays the first SERVERID when reuse_cookie.
  void bench(int n, bool reuse_cookie, std::function<void(BenchResult)> done);

  /// Writes a file on the shared export through the store service.
  void store_write(const std::string& path, const std::string& bytes,
                   std::function<void(bool)> done);

  /// Raw request to any endpoint (status queries, relocation).
  void ask(const std::string& to, std::string body, Millis timeout,
           std::function<void(std::optional<std::string>)> done);

  void invalidate() { cached_.reset(); }

 protected:
  void on_message(const Envelope&) override {}

 private:
  void resolve(std::function<void(std::optional<Resolution>)> done);
  void send_http(http::Request req, bool retried, Millis sent, Done done);
  void bench_step(int left, bool reuse_cookie, std::shared_ptr<BenchResult> acc,
                  std::optional<std::string> cookie, std::function<void(BenchResult)> done);

  Options options_;
  std::optional<Resolution> cached_;
  Millis cached_until_{0};
  ResolveBackoff backoff_;
};

}  // namespace hacluster
