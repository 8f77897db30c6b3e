#include "hacluster/service_manager.hpp"

#include <algorithm>
#include <map>

namespace hacluster {

std::string_view to_string(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::VirtualEndpoint: return "virtual_endpoint";
    case ResourceKind::SharedStore: return "shared_store";
    case ResourceKind::Balancer: return "balancer";
  }
  return "?";
}

std::string_view to_string(ResourceStatus status) {
  switch (status) {
    case ResourceStatus::Stopped: return "stopped";
    case ResourceStatus::Running: return "running";
    case ResourceStatus::Failed: return "failed";
  }
  return "?";
}

std::string_view to_string(GroupState state) {
  switch (state) {
    case GroupState::Stopped: return "stopped";
    case GroupState::Starting: return "starting";
    case GroupState::Started: return "started";
    case GroupState::Stopping: return "stopping";
    case GroupState::Relocating: return "relocating";
    case GroupState::Failed: return "failed";
  }
  return "?";
}

std::optional<ResourceKind> parse_resource_kind(std::string_view text) {
  if (iequals(text, "virtual_endpoint") || iequals(text, "vip") || iequals(text, "endpoint"))
    return ResourceKind::VirtualEndpoint;
  if (iequals(text, "shared_store") || iequals(text, "store") || iequals(text, "nfs"))
    return ResourceKind::SharedStore;
  if (iequals(text, "balancer") || iequals(text, "haproxy")) return ResourceKind::Balancer;
  return std::nullopt;
}

std::string to_string(const Action& a) {
  switch (a.kind) {
    case Action::Kind::StartLocally: return "StartLocally";
    case Action::Kind::StopLocally: return "StopLocally";
    case Action::Kind::Fence: return "Fence(" + a.node + ")";
    case Action::Kind::Relocate: return "Relocate(" + a.node + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Planner

namespace {

bool runs_locally(const PlannerInput& in) {
  const auto& local = in.membership.local().id.name;
  return in.group.owner == local &&
         (in.group.state == GroupState::Starting || in.group.state == GroupState::Started ||
          in.group.state == GroupState::Stopping);
}

std::vector<const Member*> by_ordinal(const MembershipSnapshot& s) {
  std::vector<const Member*> out;
  for (const auto& m : s.members) out.push_back(&m);
  std::sort(out.begin(), out.end(),
            [](const Member* a, const Member* b) { return a->id.ordinal < b->id.ordinal; });
  return out;
}

}  // namespace

std::optional<std::string> live_owner(const PlannerInput& in) {
  if (runs_locally(in)) return in.membership.local().id.name;
  const Member* best = nullptr;
  for (const auto& m : in.membership.members) {
    if (m.is_local || !m.online() || m.owner_term == 0) continue;
    if (!best || m.owner_term > best->owner_term) best = &m;
  }
  if (best) return best->id.name;
  return std::nullopt;
}

std::vector<Action> evaluate(const PlannerInput& in) {
  std::vector<Action> actions;
  const auto& snap = in.membership;
  const std::string& local = snap.local().id.name;

  if (!snap.effective_quorate()) {
    if (runs_locally(in)) actions.push_back(Action::stop());
    return actions;
  }

  const auto ordered = by_ordinal(snap);
  for (const Member* m : ordered)
    if (!m->online() && in.needs_fence.contains(m->id.name))
      actions.push_back(Action::fence(m->id.name));

  if (auto owner = live_owner(in)) {
    if (in.failback && *owner == local) {
      for (const Member* m : ordered) {
        if (!m->online() || in.excluded.contains(m->id.name)) continue;
        if (m->id.name != local) actions.push_back(Action::relocate(m->id.name));
        break;
      }
    }
    return actions;
  }

  const Member* placement = nullptr;
  for (const Member* m : ordered) {
    if (m->online() && !in.excluded.contains(m->id.name)) {
      placement = m;
      break;
    }
  }
  if (!placement || placement->id.name != local) return actions;

  if (in.last_owner && *in.last_owner != local) {
    const Member* prev = snap.find(*in.last_owner);
    auto fenced = in.fenced_through.find(*in.last_owner);
    const bool covered = fenced != in.fenced_through.end() && fenced->second >= in.last_owner_term;
    const bool listed = std::find(actions.begin(), actions.end(), Action::fence(*in.last_owner)) !=
                        actions.end();
    if (prev && !prev->online() && !covered && !listed)
      actions.push_back(Action::fence(*in.last_owner));
  }
  actions.push_back(Action::start());
  return actions;
}

// ---------------------------------------------------------------------------
// LifecycleLog

void LifecycleLog::append(LifecycleEvent e) {
  std::lock_guard lock(mu_);
  events_.push_back(std::move(e));
}

void LifecycleLog::node_reset(const std::string& node, Millis at) {
  LifecycleEvent e;
  e.at = at;
  e.node = node;
  e.kind = ResourceKind::VirtualEndpoint;
  e.reset = true;
  append(std::move(e));
}

std::vector<LifecycleEvent> LifecycleLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

bool LifecycleLog::ordered(const std::vector<ResourceKind>& order) const {
  std::lock_guard lock(mu_);
  std::map<std::string, std::vector<ResourceKind>> running;
  for (const auto& e : events_) {
    auto& stack = running[e.node];
    if (e.reset) {
      stack.clear();
      continue;
    }
    if (e.start) {
      if (stack.size() >= order.size() || order[stack.size()] != e.kind) return false;
      if (e.ok) stack.push_back(e.kind);
    } else {
      if (stack.empty() || stack.back() != e.kind) return false;
      stack.pop_back();
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// GroupController

GroupController::GroupController(std::string node, std::vector<Resource*> resources,
                                 LifecycleLog* log, Clock clock)
    : node_(std::move(node)), resources_(std::move(resources)), log_(log),
      clock_(std::move(clock)) {}

void GroupController::log(ResourceKind kind, bool start, bool ok) {
  if (!log_) return;
  log_->append(LifecycleEvent{clock_ ? clock_() : Millis{0}, node_, kind, start, ok, false});
}

void GroupController::start(bool quorate, std::uint64_t term, StartDone done) {
  if (!quorate) throw Error(Errc::NotQuorate, node_);
  busy_ = true;
  start_from(0, term, std::move(done));
}

void GroupController::start_from(std::size_t index, std::uint64_t term, StartDone done) {
  if (index == resources_.size()) {
    busy_ = false;
    done(std::nullopt);
    return;
  }
  Resource* r = resources_[index];
  r->start(term, [this, index, term, done = std::move(done), r](bool ok) mutable {
    log(r->kind(), true, ok);
    if (ok) {
      start_from(index + 1, term, std::move(done));
      return;
    }
    const ResourceKind failed = r->kind();
    stop_from(index, [this, failed, done = std::move(done)] {
      busy_ = false;
      done(failed);
    });
  });
}

void GroupController::stop(std::function<void()> done) {
  busy_ = true;
  stop_from(resources_.size(), [this, done = std::move(done)] {
    busy_ = false;
    done();
  });
}

// Stops resources [0, count) in reverse order, skipping ones already stopped.
void GroupController::stop_from(std::size_t count, std::function<void()> done) {
  if (count == 0) {
    done();
    return;
  }
  Resource* r = resources_[count - 1];
  if (r->status() == ResourceStatus::Stopped) {
    stop_from(count - 1, std::move(done));
    return;
  }
  r->stop([this, count, r, done = std::move(done)]() mutable {
    log(r->kind(), false, true);
    stop_from(count - 1, std::move(done));
  });
}

std::optional<ResourceKind> GroupController::monitor() const {
  for (const Resource* r : resources_)
    if (!r->healthy()) return r->kind();
  return std::nullopt;
}

std::vector<ResourceRef> GroupController::refs() const {
  std::vector<ResourceRef> out;
  for (const Resource* r : resources_) out.push_back({r->kind(), r->status()});
  return out;
}

// ---------------------------------------------------------------------------
// OwnershipLog

void OwnershipLog::started(const std::string& node, std::uint64_t term, Millis at) {
  std::lock_guard lock(mu_);
  records_.push_back({node, term, at, std::nullopt});
}

void OwnershipLog::ended(const std::string& node, Millis at) {
  std::lock_guard lock(mu_);
  for (auto& r : records_)
    if (r.node == node && !r.end) r.end = at;
}

std::vector<OwnershipLog::Record> OwnershipLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

}  // namespace hacluster
