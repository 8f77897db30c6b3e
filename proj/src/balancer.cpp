#include "hacluster/balancer.hpp"

#include <set>

namespace hacluster {

SchedulerState SchedulerState::make(std::vector<Backend> pool) {
  if (pool.empty() || pool.size() > kMaxBackends)
    throw Error(Errc::InvalidConfig, "backend pool must hold 1.." +
                                         std::to_string(kMaxBackends) + " entries");
  std::set<std::string> ids;
  for (const auto& b : pool) {
    if (b.id.empty()) throw Error(Errc::InvalidConfig, "empty backend id");
    if (!ids.insert(b.id).second) throw Error(Errc::InvalidConfig, "duplicate backend " + b.id);
  }
  return SchedulerState{std::move(pool), 0};
}

const Backend* SchedulerState::find(std::string_view id) const {
  for (const auto& b : pool)
    if (b.id == id) return &b;
  return nullptr;
}

Backend* SchedulerState::find(std::string_view id) {
  for (auto& b : pool)
    if (b.id == id) return &b;
  return nullptr;
}

std::pair<Backend, SchedulerState> next_backend(const SchedulerState& state) {
  const std::size_t n = state.pool.size();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = (state.cursor + step) % n;
    if (state.pool[i].up()) {
      SchedulerState next = state;
      next.cursor = (i + 1) % n;
      return {state.pool[i], std::move(next)};
    }
  }
  throw Error(Errc::NoHealthyBackend);
}

Backend apply_probe(Backend b, bool success, const HealthPolicy& policy) {
  if (success) {
    b.consecutive_fail = 0;
    ++b.consecutive_ok;
    if (!b.up() && b.consecutive_ok >= policy.rise_count) {
      b.health = Health::Up;
      b.consecutive_ok = 0;
    }
  } else {
    b.consecutive_ok = 0;
    ++b.consecutive_fail;
    if (b.up() && b.consecutive_fail >= policy.fall_count) {
      b.health = Health::Down;
      b.consecutive_fail = 0;
    }
  }
  return b;
}

std::string server_id_cookie(std::string_view backend_id) {
  return std::string(kServerIdCookie) + "=" + std::string(backend_id) + "; path=/";
}

Balancer::Balancer(std::vector<Backend> pool, HealthPolicy policy)
    : policy_(policy), state_(SchedulerState::make(std::move(pool))) {
  for (const auto& b : state_.pool) stats_.push_back({b.id, 0, 0, b.health});
}

BackendStats& Balancer::stats_locked(std::string_view id) {
  for (auto& s : stats_)
    if (s.id == id) return s;
  throw Error(Errc::UnknownNode, std::string(id));
}

std::optional<Balancer::Decision> Balancer::round_robin_locked() {
  try {
    auto [backend, next] = next_backend(state_);
    state_ = std::move(next);
    return Decision{backend.id, backend.address, false};
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<Balancer::Decision> Balancer::select(const http::Request& request) {
  std::lock_guard lock(mu_);
  if (auto sticky = request.cookie(kServerIdCookie)) {
    if (const Backend* b = state_.find(*sticky); b && b->up())
      return Decision{b->id, b->address, true};
  }
  return round_robin_locked();
}

void Balancer::mark_failure_locked(std::string_view failed_id) {
  if (Backend* b = state_.find(failed_id)) {
    *b = apply_probe(*b, false, policy_);
    auto& s = stats_locked(failed_id);
    ++s.errors;
    s.health = b->health;
  }
}

std::optional<Balancer::Decision> Balancer::fail_and_reselect(const std::string& failed_id) {
  std::lock_guard lock(mu_);
  mark_failure_locked(failed_id);
  return round_robin_locked();
}

void Balancer::mark_upstream_failure(const std::string& failed_id) {
  std::lock_guard lock(mu_);
  mark_failure_locked(failed_id);
}

http::Response Balancer::complete(const Decision& decision, http::Response upstream) {
  {
    std::lock_guard lock(mu_);
    ++stats_locked(decision.backend_id).requests;
  }
  http::remove_header_if(upstream.headers, "Set-Cookie", [](std::string_view v) {
    return trim(v).starts_with(std::string(kServerIdCookie) + "=");
  });
  upstream.headers.emplace_back("Set-Cookie", server_id_cookie(decision.backend_id));
  return upstream;
}

http::Response Balancer::reject_no_backend() {
  {
    std::lock_guard lock(mu_);
    ++errors_;
    ++rejected_;
  }
  return http::make_response(503);
}

http::Response Balancer::bad_gateway() {
  {
    std::lock_guard lock(mu_);
    ++errors_;
  }
  return http::make_response(502);
}

void Balancer::record_probe(const std::string& backend_id, bool success) {
  std::lock_guard lock(mu_);
  Backend* b = state_.find(backend_id);
  if (!b) return;
  *b = apply_probe(*b, success, policy_);
  stats_locked(backend_id).health = b->health;
}

ProxiedExchange Balancer::route(const http::Request& request, const Upstream& upstream) {
  using Clock = std::chrono::steady_clock;
  ProxiedExchange ex;
  ex.request = request;
  auto t0 = Clock::now();
  auto decision = select(request);
  ex.selection_time = Clock::now() - t0;
  if (!decision) {
    ex.response = reject_no_backend();
    return ex;
  }
  for (int attempt = 0; attempt < 2 && decision; ++attempt) {
    Backend target;
    {
      std::lock_guard lock(mu_);
      if (const Backend* b = state_.find(decision->backend_id)) target = *b;
    }
    auto t1 = Clock::now();
    auto resp = upstream(target, request);
    ex.upstream_time += Clock::now() - t1;
    if (resp) {
      ex.selected = decision->backend_id;
      ex.response = complete(*decision, std::move(*resp));
      return ex;
    }
    if (attempt == 0) decision = fail_and_reselect(decision->backend_id);
    else mark_upstream_failure(decision->backend_id);
  }
  ex.response = bad_gateway();
  return ex;
}

BalancerStats Balancer::snapshot_stats() const {
  std::lock_guard lock(mu_);
  return BalancerStats{stats_, state_.cursor, errors_, rejected_};
}

SchedulerState Balancer::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

}  // namespace hacluster
