#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hacluster/common.hpp"
#include "hacluster/http.hpp"

namespace hacluster {

inline constexpr std::size_t kMaxBackends = 16;
inline constexpr std::string_view kServerIdCookie = "SERVERID";

enum class Health { Up, Down };

struct Backend {
  std::string id;
  std::string address;
  Health health = Health::Up;
  int consecutive_fail = 0;
  int consecutive_ok = 0;

  bool up() const { return health == Health::Up; }
  friend bool operator==(const Backend&, const Backend&) = default;
};

/// Round-robin pool and cursor. The cursor names the next candidate index.
struct SchedulerState {
  std::vector<Backend> pool;
  std::size_t cursor = 0;

  /// Throws InvalidConfig unless 1..16 backends with unique, non-empty ids.
  static SchedulerState make(std::vector<Backend> pool);

  const Backend* find(std::string_view id) const;
  Backend* find(std::string_view id);
};

/// Returns the first Up backend at or after the cursor (cyclic scan) and the
/// state with the cursor moved past it. Throws NoHealthyBackend.
std::pair<Backend, SchedulerState> next_backend(const SchedulerState& state);

struct HealthPolicy {
  Millis interval{1000};
  Millis timeout{500};
  int fall_count = 2;
  int rise_count = 2;
};

/// Hysteresis rule: Up->Down after fall_count consecutive failures, Down->Up
/// after rise_count consecutive successes; both counters reset on a transition.
Backend apply_probe(Backend backend, bool success, const HealthPolicy& policy);

/// `SERVERID=<id>; path=/`
std::string server_id_cookie(std::string_view backend_id);

struct BackendStats {
  std::string id;
  std::uint64_t requests = 0;
  std::uint64_t errors = 0;
  Health health = Health::Up;
};

struct BalancerStats {
  std::vector<BackendStats> backends;
  std::size_t cursor = 0;
  // Requests answered by the proxy itself (503 NoHealthyBackend, 502 after retry).
  std::uint64_t errors = 0;
  std::uint64_t rejected = 0;
};

struct ProxiedExchange {
  http::Request request;
  std::optional<std::string> selected;
  http::Response response;
  std::chrono::nanoseconds selection_time{0};
  std::chrono::nanoseconds upstream_time{0};
};

/// Layer-7 round-robin dispatcher with SERVERID cookie persistence.
///
/// All state changes go through one internal lock, so route()/select() may be
/// used from many client connections while health probes run concurrently.
class Balancer {
 public:
  struct Decision {
    std::string backend_id;
    std::string address;
    bool persisted = false;
  };

  // Returns nullopt when the upstream cannot be reached (connect/read failure).
  using Upstream =
      std::function<std::optional<http::Response>(const Backend&, const http::Request&)>;

  explicit Balancer(std::vector<Backend> pool, HealthPolicy policy = {});

  /// Cookie persistence first, otherwise round robin. nullopt: no healthy backend.
  std::optional<Decision> select(const http::Request& request);
  /// Marks an upstream failure on `failed_id` and picks the retry target.
  std::optional<Decision> fail_and_reselect(const std::string& failed_id);
  void mark_upstream_failure(const std::string& failed_id);
  /// Stamps the SERVERID cookie on an upstream response and counts it.
  http::Response complete(const Decision& decision, http::Response upstream);
  http::Response reject_no_backend();
  http::Response bad_gateway();

  void record_probe(const std::string& backend_id, bool success);

  ProxiedExchange route(const http::Request& request, const Upstream& upstream);

  BalancerStats snapshot_stats() const;
  SchedulerState state() const;
  const HealthPolicy& policy() const { return policy_; }

 private:
  std::optional<Decision> round_robin_locked();
  void mark_failure_locked(std::string_view failed_id);
  BackendStats& stats_locked(std::string_view id);

  HealthPolicy policy_;
  mutable std::mutex mu_;
  SchedulerState state_;
  std::vector<BackendStats> stats_;
  std::uint64_t errors_ = 0;
  std::uint64_t rejected_ = 0;
};

}  // namespace hacluster
