#include "hacluster/cluster_node.hpp"

#include <algorithm>

#include "hacluster/protocol.hpp"
#include "hacluster/virtual_endpoint.hpp"

namespace hacluster {

// ---------------------------------------------------------------------------
// Resources

class ClusterNode::EndpointResource final : public Resource {
 public:
  explicit EndpointResource(ClusterNode& node) : node_(node) {}

  ResourceKind kind() const override { return ResourceKind::VirtualEndpoint; }

  void start(std::uint64_t term, std::function<void(bool)> done) override {
    killed_ = false;
    term_ = term;
    auto& n = node_;
    const auto& vip = n.dep().service.vip;
    n.call(std::string(kRegistryEndpoint), wire::bind(vip, n.name(), term, n.incarnation()),
           n.dep().timings.registry_timeout,
           [this, done = std::move(done), term](std::optional<Envelope> r) {
             if (r && r->body == "OK") {
               status_ = ResourceStatus::Running;
               done(true);
               return;
             }
             if (r) {
               if (auto cur = vip_wire::parse_stale_epoch(r->body))
                 node_.known_term_ = std::max(node_.known_term_, *cur);
             }
             // The bind may have landed even though we did not hear back.
             node_.send(std::string(kRegistryEndpoint),
                        vip_wire::unbind(node_.dep().service.vip, node_.name(), term));
             done(false);
           });
  }

  void stop(std::function<void()> done) override {
    auto& n = node_;
    n.call(std::string(kRegistryEndpoint), vip_wire::unbind(n.dep().service.vip, n.name(), term_),
           n.dep().timings.registry_timeout,
           [this, done = std::move(done)](std::optional<Envelope>) {
             status_ = ResourceStatus::Stopped;
             done();
           });
  }

  bool healthy() const override { return status_ == ResourceStatus::Running && !killed_; }
  ResourceStatus status() const override { return status_; }
  void kill() { killed_ = true; }
  bool killed() const { return killed_; }

 private:
  ClusterNode& node_;
  ResourceStatus status_ = ResourceStatus::Stopped;
  std::uint64_t term_ = 0;
  bool killed_ = false;
};

class ClusterNode::StoreResource final : public Resource {
 public:
  explicit StoreResource(ClusterNode& node) : node_(node) {}

  ResourceKind kind() const override { return ResourceKind::SharedStore; }

  void start(std::uint64_t term, std::function<void(bool)> done) override {
    killed_ = false;
    try {
      std::uint64_t fenced = 0;
      const auto holder = node_.env_.san->get(node_.dep().store.volume_id)->holder();
      if (auto it = node_.fenced_through_.find(holder.node); it != node_.fenced_through_.end())
        fenced = it->second;
      node_.store_.attach_volume(term, fenced);
    } catch (const Error&) {
      done(false);
      return;
    }
    done(true);
  }

  void stop(std::function<void()> done) override {
    node_.store_.stop();
    done();
  }

  bool healthy() const override { return node_.store_.healthy() && !killed_; }
  ResourceStatus status() const override {
    return node_.store_.running() ? ResourceStatus::Running : ResourceStatus::Stopped;
  }
  void kill() { killed_ = true; }
  bool killed() const { return killed_; }

 private:
  ClusterNode& node_;
  bool killed_ = false;
};

class ClusterNode::BalancerResource final : public Resource {
 public:
  explicit BalancerResource(ClusterNode& node) : node_(node) {}

  ResourceKind kind() const override { return ResourceKind::Balancer; }

  void start(std::uint64_t, std::function<void(bool)> done) override {
    killed_ = false;
    std::vector<Backend> pool;
    for (const auto& b : node_.dep().backends) pool.push_back(Backend{b.id, b.address});
    try {
      // Fresh process: persistence and health state do not survive relocation.
      node_.balancer_ = std::make_shared<Balancer>(std::move(pool), node_.dep().health);
    } catch (const Error&) {
      done(false);
      return;
    }
    status_ = ResourceStatus::Running;
    const std::uint64_t run = ++node_.balancer_run_;
    node_.after(node_.dep().health.interval, [this, run] { node_.probe_backends(run); });
    done(true);
  }

  void stop(std::function<void()> done) override {
    ++node_.balancer_run_;
    node_.balancer_.reset();
    status_ = ResourceStatus::Stopped;
    done();
  }

  bool healthy() const override { return status_ == ResourceStatus::Running && !killed_; }
  ResourceStatus status() const override { return status_; }
  void kill() { killed_ = true; }
  bool killed() const { return killed_; }

 private:
  ClusterNode& node_;
  ResourceStatus status_ = ResourceStatus::Stopped;
  bool killed_ = false;
};

// ---------------------------------------------------------------------------

ClusterNode::ClusterNode(Fabric& fabric, const std::string& name,
                         std::uint64_t previous_incarnation, Env env)
    : Actor(fabric, name),
      env_(std::move(env)),
      membership_(env_.deployment->cluster, name, previous_incarnation, fabric.now()),
      store_(name, env_.deployment->store, env_.san) {
  group_.name = dep().service.name;
  endpoint_res_ = std::make_unique<EndpointResource>(*this);
  store_res_ = std::make_unique<StoreResource>(*this);
  balancer_res_ = std::make_unique<BalancerResource>(*this);
  std::vector<Resource*> resources{endpoint_res_.get()};
  if (two_tier()) resources.push_back(store_res_.get());
  resources.push_back(balancer_res_.get());
  controller_ = std::make_unique<GroupController>(name, std::move(resources), env_.lifecycle,
                                                  [&fabric] { return fabric.now(); });
  group_.resources = controller_->refs();
}

ClusterNode::~ClusterNode() { detach(); }

std::vector<ResourceKind> ClusterNode::resource_order() const {
  if (two_tier())
    return {ResourceKind::VirtualEndpoint, ResourceKind::SharedStore, ResourceKind::Balancer};
  return {ResourceKind::VirtualEndpoint, ResourceKind::Balancer};
}

void ClusterNode::boot() {
  attach();
  send_heartbeats();
  after(dep().cluster.heartbeat_interval, [this] { heartbeat_loop(); });
  after(dep().timings.tick, [this] { tick_loop(); });
  after(dep().timings.monitor_interval, [this] { monitor_loop(); });
}

void ClusterNode::heartbeat_loop() {
  send_heartbeats();
  after(dep().cluster.heartbeat_interval, [this] { heartbeat_loop(); });
}

void ClusterNode::tick_loop() {
  on_tick();
  after(dep().timings.tick, [this] { tick_loop(); });
}

void ClusterNode::monitor_loop() {
  on_monitor();
  after(dep().timings.monitor_interval, [this] { monitor_loop(); });
}

bool ClusterNode::owner_active() const {
  return group_.owner == name() &&
         (group_.state == GroupState::Starting || group_.state == GroupState::Started ||
          group_.state == GroupState::Stopping || group_.state == GroupState::Relocating);
}

bool ClusterNode::serving() const {
  return !halted_ && group_.owner == name() && group_.state == GroupState::Started &&
         balancer_res_->healthy() && endpoint_res_->healthy();
}

std::optional<BalancerStats> ClusterNode::balancer_stats() const {
  if (!balancer_) return std::nullopt;
  return balancer_->snapshot_stats();
}

void ClusterNode::kill_resource(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::VirtualEndpoint: endpoint_res_->kill(); break;
    case ResourceKind::SharedStore: store_res_->kill(); break;
    case ResourceKind::Balancer: balancer_res_->kill(); break;
  }
}

// ---------------------------------------------------------------------------
// Membership

void ClusterNode::send_heartbeats() {
  if (halted_) return;
  const std::uint64_t owner_term = owner_active() ? group_.term : 0;
  const std::string line = membership_.make_heartbeat(owner_term).encode();
  for (const auto& m : dep().cluster.members)
    if (m.id.name != name()) send(m.id.name, line);
}

void ClusterNode::on_heartbeat(const Envelope& e) {
  const auto delta = membership_.accept(e.body, now());
  const auto snap = membership_.snapshot();
  if (delta.kind == MembershipDelta::Kind::MemberUp) needs_fence_.erase(delta.node);
  const Member* m = snap.find(e.from);
  if (!m || !m->online()) return;
  if (m->owner_term > 0) {
    known_term_ = std::max(known_term_, m->owner_term);
    if (m->owner_term >= last_owner_term_) {
      last_owner_ = m->id.name;
      last_owner_term_ = m->owner_term;
    }
    // Someone owns the group at a newer term: step down.
    if (owner_active() && m->owner_term > group_.term) demote();
  }
}

void ClusterNode::on_tick() {
  if (halted_) return;
  const auto deltas = membership_.tick(now());
  if (!deltas.empty()) {
    const auto snap = membership_.snapshot();
    for (const auto& d : deltas) {
      if (d.kind != MembershipDelta::Kind::MemberDown || d.node == name()) continue;
      const Member* m = snap.find(d.node);
      auto it = fenced_incarnation_.find(d.node);
      if (m && it != fenced_incarnation_.end() && it->second >= m->incarnation) continue;
      needs_fence_.insert(d.node);
    }
  }
  reconcile();
}

// ---------------------------------------------------------------------------
// Placement

bool ClusterNode::excluded(const std::string& node) const {
  auto it = excluded_until_.find(node);
  return it != excluded_until_.end() && it->second > now();
}

PlannerInput ClusterNode::planner_input() const {
  PlannerInput in;
  in.membership = membership_.snapshot();
  in.group = group_;
  in.last_owner = last_owner_;
  in.last_owner_term = last_owner_term_;
  in.needs_fence = needs_fence_;
  in.fenced_through = fenced_through_;
  for (const auto& m : dep().cluster.members)
    if (excluded(m.id.name)) in.excluded.insert(m.id.name);
  in.failback = dep().failback;
  return in;
}

void ClusterNode::reconcile() {
  if (halted_ || busy_ || controller_->busy()) return;
  const auto actions = evaluate(planner_input());
  bool fence_pending = !fencing_.empty();
  for (const auto& a : actions) {
    switch (a.kind) {
      case Action::Kind::Fence:
        fence_pending = true;
        if (!fencing_.contains(a.node)) fence(a.node, [this](bool) { reconcile(); });
        break;
      case Action::Kind::StopLocally:
        if (owner_active() && group_.state != GroupState::Stopping) demote();
        return;
      case Action::Kind::StartLocally:
        if (!fence_pending) claim();
        return;
      case Action::Kind::Relocate: {
        Envelope self;
        self.from = name();
        self.to = name();
        self.body = wire::relocate(a.node);
        on_relocate(self);
        return;
      }
    }
  }
}

void ClusterNode::fence(const std::string& victim, std::function<void(bool)> done) {
  const auto snap = membership_.snapshot();
  const Member* m = snap.find(victim);
  wire::FenceRequest req;
  req.victim = victim;
  req.victim_incarnation = m ? m->incarnation : 0;
  req.epoch = known_term_;
  req.requester_incarnation = membership_.incarnation();
  fencing_.insert(victim);
  call(std::string(kFenceEndpoint), req.encode(), dep().timings.fence_timeout,
       [this, req, done = std::move(done)](std::optional<Envelope> r) {
         fencing_.erase(req.victim);
         bool ok = false;
         if (r) {
           auto w = split_words(r->body);
           if (w.size() == 2 && w[0] == "OK") {
             const std::uint64_t epoch = std::stoull(w[1]);
             auto& ft = fenced_through_[req.victim];
             ft = std::max(ft, epoch);
             auto& fi = fenced_incarnation_[req.victim];
             fi = std::max(fi, req.victim_incarnation);
             needs_fence_.erase(req.victim);
             ok = true;
           }
         }
         done(ok);
       });
}

void ClusterNode::claim() {
  busy_ = true;
  const auto& vip = dep().service.vip;
  call(std::string(kRegistryEndpoint), vip_wire::resolve(vip), dep().timings.registry_timeout,
       [this](std::optional<Envelope> r) {
         if (!r) {
           busy_ = false;
           return;
         }
         const std::uint64_t reg_epoch = vip_wire::parse_epoch(r->body).value_or(0);
         known_term_ = std::max(known_term_, reg_epoch);
         auto covered = [this](const std::string& node, std::uint64_t epoch) {
           auto it = fenced_through_.find(node);
           return it != fenced_through_.end() && it->second >= epoch;
         };
         std::optional<std::string> victim;
         if (auto owner = vip_wire::parse_owner(r->body);
             owner && owner->owner != name() && !covered(owner->owner, owner->epoch))
           victim = owner->owner;
         if (!victim && two_tier()) {
           const auto h = env_.san->get(dep().store.volume_id)->holder();
           if (!h.released && !h.node.empty() && h.node != name() && !covered(h.node, h.epoch))
             victim = h.node;
         }
         if (victim) {
           fence(*victim, [this](bool) {
             busy_ = false;
             reconcile();
           });
           return;
         }
         // Re-check: the view may have changed while the registry answered.
         busy_ = false;
         const auto actions = evaluate(planner_input());
         if (std::find(actions.begin(), actions.end(), Action::start()) == actions.end()) return;
         start_group(known_term_ + 1);
       });
}

void ClusterNode::start_group(std::uint64_t term) {
  busy_ = true;
  known_term_ = std::max(known_term_, term);
  group_.owner = name();
  group_.term = term;
  group_.state = GroupState::Starting;
  send_heartbeats();
  const bool quorate = membership_.snapshot().effective_quorate();
  try {
    controller_->start(quorate, term, [this, term](std::optional<ResourceKind> failed) {
      group_.resources = controller_->refs();
      if (halted_ || group_.term != term) return;
      if (!failed) {
        group_.state = GroupState::Started;
        last_owner_ = name();
        last_owner_term_ = term;
        if (env_.ownership) env_.ownership->started(name(), term, now());
        busy_ = false;
        return;
      }
      group_.state = GroupState::Failed;
      group_.owner.reset();
      busy_ = false;
      hand_off(term);
    });
  } catch (const Error&) {
    group_.state = GroupState::Stopped;
    group_.owner.reset();
    busy_ = false;
  }
}

void ClusterNode::stop_group(std::function<void()> done) {
  busy_ = true;
  const bool was_started = group_.state == GroupState::Started;
  if (group_.state != GroupState::Relocating) group_.state = GroupState::Stopping;
  controller_->stop([this, was_started, done = std::move(done)] {
    group_.resources = controller_->refs();
    if (halted_) return;
    if (was_started && env_.ownership) env_.ownership->ended(name(), now());
    group_.owner.reset();
    busy_ = false;
    done();
  });
}

void ClusterNode::demote() {
  if (busy_ || controller_->busy()) return;
  stop_group([this] {
    group_.state = GroupState::Stopped;
    send_heartbeats();
  });
}

std::optional<std::string> ClusterNode::handoff_target() const {
  const auto snap = membership_.snapshot();
  const Member* best = nullptr;
  for (const auto& m : snap.members) {
    if (m.is_local || !m.online() || excluded(m.id.name)) continue;
    if (!best || m.id.ordinal < best->id.ordinal) best = &m;
  }
  if (!best) return std::nullopt;
  return best->id.name;
}

// Start failure or resource failure: cool down locally and pass the group on.
void ClusterNode::hand_off(std::uint64_t term) {
  excluded_until_[name()] = now() + dep().timings.cooldown;
  send_heartbeats();
  if (auto target = handoff_target()) send(*target, wire::takeover(term));
}

void ClusterNode::on_monitor() {
  if (halted_ || busy_ || controller_->busy()) return;
  if (group_.state != GroupState::Started || group_.owner != name()) return;
  if (!controller_->monitor()) return;
  const std::uint64_t term = group_.term;
  stop_group([this, term] {
    group_.state = GroupState::Failed;
    hand_off(term);
  });
}

void ClusterNode::on_takeover(const Envelope& e) {
  excluded_until_[e.from] = now() + dep().timings.cooldown;
  // The sender picked us; keep the others out of our placement for a while.
  for (const auto& m : dep().cluster.members) {
    if (m.id.name == name() || m.id.name == e.from) continue;
    auto& until = excluded_until_[m.id.name];
    until = std::max(until, now() + dep().timings.takeover_timeout);
  }
  excluded_until_.erase(name());
  reconcile();
}

void ClusterNode::on_relocate(const Envelope& e) {
  auto w = split_words(e.body);
  auto answer = [&](std::string body) {
    if (e.from != name()) reply(e, std::move(body));
  };
  if (w.size() != 2) return answer("ERR ProtocolError");
  const std::string target = w[1];
  const auto snap = membership_.snapshot();
  const Member* t = snap.find(target);
  if (!t) return answer("ERR UnknownMember");
  if (!t->online()) return answer("ERR TargetOffline");
  if (!snap.effective_quorate()) return answer("ERR NotQuorate");
  if (target == name() && group_.owner == name() && group_.state == GroupState::Started)
    return answer("OK");
  if (group_.owner != name() || group_.state != GroupState::Started) {
    if (auto owner = live_owner(planner_input()); owner && *owner == target) return answer("OK");
    return answer("ERR NotOwner");
  }
  if (busy_ || controller_->busy()) return answer("ERR Busy");
  const std::uint64_t term = group_.term;
  group_.state = GroupState::Relocating;
  stop_group([this, e, target, term] {
    group_.state = GroupState::Stopped;
    excluded_until_[name()] = now() + dep().timings.takeover_timeout;
    send_heartbeats();
    send(target, wire::takeover(term));
    if (e.from != name()) reply(e, "OK");
  });
}

void ClusterNode::on_fenced(const Envelope& e) {
  auto w = split_words(e.body);
  if (w.size() != 3) return;
  if (std::stoull(w[2]) < membership_.incarnation()) return;  // aimed at a previous life
  halted_ = true;
  if (owner_active() && env_.ownership) env_.ownership->ended(name(), now());
  if (env_.power_off) env_.power_off(name());
}

// ---------------------------------------------------------------------------
// Data path

void ClusterNode::on_http(const Envelope& e) {
  if (!serving() || e.epoch != group_.term) {
    reply(e, std::string(wire::kRefused));
    return;
  }
  auto req = wire::parse_http_request(e.body);
  auto bal = balancer_;
  const std::uint64_t term = group_.term;
  if (!req) {
    reply(e, http::serialize(http::make_response(400)), term);
    return;
  }
  auto decision = bal->select(*req);
  if (!decision) {
    reply(e, http::serialize(bal->reject_no_backend()), term);
    return;
  }
  forward(e, std::move(*req), std::move(*decision), 0, std::move(bal), term);
}

void ClusterNode::forward(const Envelope& client, http::Request req, Balancer::Decision decision,
                          int attempt, std::shared_ptr<Balancer> bal, std::uint64_t term) {
  const bool head = req.method == "HEAD";
  const std::string body = wire::http_request(req);
  call(decision.backend_id, body, dep().timings.upstream_timeout,
       [this, client, req = std::move(req), decision, attempt, bal, term,
        head](std::optional<Envelope> r) mutable {
         // Nothing goes out once this node has stopped serving that term.
         if (!serving() || group_.term != term || balancer_ != bal) return;
         std::optional<http::Response> resp;
         if (r && r->body != wire::kRefused) resp = http::parse_response(r->body, head);
         if (resp) {
           reply(client, http::serialize(bal->complete(decision, std::move(*resp))), term);
           return;
         }
         if (attempt == 0) {
           auto next = bal->fail_and_reselect(decision.backend_id);
           if (!next) {
             reply(client, http::serialize(bal->reject_no_backend()), term);
             return;
           }
           forward(client, std::move(req), std::move(*next), 1, bal, term);
           return;
         }
         bal->mark_upstream_failure(decision.backend_id);
         reply(client, http::serialize(bal->bad_gateway()), term);
       },
       term);
}

void ClusterNode::probe_backends(std::uint64_t run) {
  if (run != balancer_run_ || !balancer_) return;
  auto bal = balancer_;
  const std::uint64_t term = group_.term;
  http::Request probe;
  probe.method = "HEAD";
  probe.path = "/";
  for (const auto& b : dep().backends) {
    call(b.id, wire::http_request(probe), dep().health.timeout,
         [bal, id = b.id](std::optional<Envelope> r) {
           bool ok = false;
           if (r && r->body != wire::kRefused)
             if (auto resp = http::parse_response(r->body, true))
               ok = resp->status >= 200 && resp->status < 400;
           bal->record_probe(id, ok);
         },
         term);
  }
  after(dep().health.interval, [this, run] { probe_backends(run); });
}

void ClusterNode::on_store(const Envelope& e) {
  if (store_res_->killed()) return;  // dead daemon: the caller times out
  if (!two_tier() || !store_.running()) {
    reply(e, store_wire::err(Errc::StaleBinding));
    return;
  }
  reply(e, store_.handle(e.body, dep().service.vip), e.epoch);
}

// ---------------------------------------------------------------------------

StatusReport ClusterNode::status() const {
  StatusReport r;
  const auto snap = membership_.snapshot();
  r.cluster_name = snap.cluster_name;
  r.timestamp_ms = env_.wall_clock ? env_.wall_clock() : now().count();
  r.quorate = snap.effective_quorate();
  for (const auto& m : dep().cluster.members) {
    const Member* s = snap.find(m.id.name);
    const bool online = s && s->online();
    r.members.push_back({m.id.name, m.id.ordinal, online, s && s->is_local, online});
  }
  ServiceRow row;
  row.name = "service:" + dep().service.name;
  if (owner_active()) {
    row.owner = name();
    row.state = std::string(to_string(group_.state));
  } else if (auto owner = live_owner(planner_input())) {
    row.owner = *owner;
    row.state = "started";
  } else {
    row.last_owner = last_owner_.value_or("");
    row.state = group_.state == GroupState::Failed ? "failed" : "stopped";
  }
  r.services.push_back(std::move(row));
  return r;
}

void ClusterNode::on_message(const Envelope& e) {
  if (halted_) return;
  const std::string_view body = e.body;
  if (body.starts_with("HB ")) return on_heartbeat(e);
  if (wire::is_http(body)) return on_http(e);
  if (body.starts_with("MOUNT ") || body.starts_with("READ ") || body.starts_with("WRITE ") ||
      body == "LIST")
    return on_store(e);
  if (body == wire::kStatus) return reply(e, status().to_json());
  if (body.starts_with("TAKEOVER ")) return on_takeover(e);
  if (body.starts_with("RELOCATE ")) return on_relocate(e);
  if (body.starts_with("FENCED ")) return on_fenced(e);
}

}  // namespace hacluster
