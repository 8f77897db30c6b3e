#include "hacluster/fabric.hpp"

#include <algorithm>

namespace hacluster {

// ---------------------------------------------------------------------------
// FenceTable

void FenceTable::fence(const std::string& node, std::uint64_t epoch, std::uint64_t incarnation,
                       Millis at) {
  std::lock_guard lock(mu_);
  auto& m = marks_[node];
  m.epoch = std::max(m.epoch, epoch);
  m.incarnation = std::max(m.incarnation, incarnation);
  m.at = at;
  events_.push_back({node, epoch, at});
}

std::optional<FenceMark> FenceTable::mark(const std::string& node) const {
  std::lock_guard lock(mu_);
  auto it = marks_.find(node);
  if (it == marks_.end()) return std::nullopt;
  return it->second;
}

bool FenceTable::blocks(const std::string& node, std::uint64_t epoch) const {
  if (epoch == 0) return false;
  std::lock_guard lock(mu_);
  auto it = marks_.find(node);
  return it != marks_.end() && epoch <= it->second.epoch;
}

std::vector<FenceTable::Event> FenceTable::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

// ---------------------------------------------------------------------------
// Partition

void Partition::validate() const {
  std::set<std::string> seen;
  for (const auto& g : groups)
    for (const auto& n : g)
      if (!seen.insert(n).second) throw Error(Errc::InvalidConfig, "node in two groups: " + n);
}

bool Partition::separates(const std::string& a, const std::string& b) const {
  if (!active) return false;
  int ga = -1, gb = -1;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].contains(a)) ga = static_cast<int>(i);
    if (groups[i].contains(b)) gb = static_cast<int>(i);
  }
  return ga >= 0 && gb >= 0 && ga != gb;
}

// ---------------------------------------------------------------------------
// Fault descriptions

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string join_group(const std::set<std::string>& g) {
  std::string out;
  for (const auto& n : g) out += (out.empty() ? "" : ",") + n;
  return out;
}
}  // namespace

std::string describe(const Fault& f) {
  return std::visit(
      overloaded{
          [](const fault::Crash& c) { return "crash " + c.node; },
          [](const fault::Restart& r) { return "restart " + r.node; },
          [](const fault::PartitionGroups& p) {
            std::string out = "partition";
            for (std::size_t i = 0; i < p.groups.size(); ++i)
              out += (i ? " | " : " ") + join_group(p.groups[i]);
            return out;
          },
          [](const fault::Heal&) { return std::string("heal"); },
          [](const fault::KillProcess& k) { return "kill " + k.node + " " + k.resource; },
          [](const fault::DetachVolume& d) { return "detach-volume " + d.node.value_or("owner"); },
          [](const fault::ReattachVolume& d) {
            return "reattach-volume " + d.node.value_or("all");
          },
          [](const fault::FenceAck& a) {
            return std::string(a.enabled ? "fence-on" : "fence-off");
          },
      },
      f);
}

// ---------------------------------------------------------------------------
// Fabric base

void Fabric::inject(const Fault& f) {
  {
    std::lock_guard lock(state_mu_);
    auto require = [&](const std::string& node) {
      if (!endpoints_.contains(node)) throw Error(Errc::UnknownNode, node);
    };
    if (auto* c = std::get_if<fault::Crash>(&f)) {
      require(c->node);
      endpoints_[c->node].crashed = true;
    } else if (auto* r = std::get_if<fault::Restart>(&f)) {
      require(r->node);
    } else if (auto* k = std::get_if<fault::KillProcess>(&f)) {
      require(k->node);
    } else if (auto* p = std::get_if<fault::PartitionGroups>(&f)) {
      Partition next{p->groups, true};
      next.validate();
      for (const auto& g : p->groups)
        for (const auto& n : g) require(n);
      partition_ = std::move(next);
    } else if (std::holds_alternative<fault::Heal>(f)) {
      partition_.active = false;
      partition_.groups.clear();
    } else if (auto* a = std::get_if<fault::FenceAck>(&f)) {
      fence_ack_ = a->enabled;
    }
  }
  FaultSink sink;
  {
    std::lock_guard lock(state_mu_);
    sink = fault_sink_;
  }
  if (sink) sink(f);
}

void Fabric::set_fault_sink(FaultSink sink) {
  std::lock_guard lock(state_mu_);
  fault_sink_ = std::move(sink);
}

void Fabric::set_delivery_observer(DeliveryObserver observer) {
  std::lock_guard lock(state_mu_);
  observer_ = std::move(observer);
}

bool Fabric::fence_ack() const {
  std::lock_guard lock(state_mu_);
  return fence_ack_;
}

bool Fabric::known(const std::string& endpoint) const {
  std::lock_guard lock(state_mu_);
  return endpoints_.contains(endpoint);
}

bool Fabric::crashed(const std::string& endpoint) const {
  std::lock_guard lock(state_mu_);
  auto it = endpoints_.find(endpoint);
  return it != endpoints_.end() && it->second.crashed;
}

std::optional<char> Fabric::filter_locked(const Envelope& e) const {
  auto from = endpoints_.find(e.from);
  auto to = endpoints_.find(e.to);
  if (to == endpoints_.end() || to->second.crashed) return 'X';
  if (from != endpoints_.end() && from->second.crashed) return 'X';
  const bool infra = to->second.cls == EndpointClass::Infrastructure ||
                     (from != endpoints_.end() && from->second.cls == EndpointClass::Infrastructure);
  if (!infra && partition_.separates(e.from, e.to)) return 'P';
  if (fences_.blocks(e.from, e.epoch) || fences_.blocks(e.to, e.epoch)) return 'F';
  return std::nullopt;
}

void Fabric::observe(const Envelope& e, Millis at) {
  DeliveryObserver obs;
  {
    std::lock_guard lock(state_mu_);
    obs = observer_;
  }
  if (obs) obs(e, at);
}

// ---------------------------------------------------------------------------
// SimFabric

SimFabric::SimFabric(FabricConfig config) : config_(config), rng_(config.seed) {
  fence_ack_ = config.fence_ack;
}

double SimFabric::uniform() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

void SimFabric::attach(const std::string& endpoint, Handler handler, EndpointClass cls) {
  std::lock_guard lock(state_mu_);
  auto& st = endpoints_[endpoint];
  st.handler = std::move(handler);
  st.cls = cls;
  st.crashed = false;
  ++st.generation;
}

void SimFabric::detach(const std::string& endpoint) {
  std::lock_guard lock(state_mu_);
  auto it = endpoints_.find(endpoint);
  if (it == endpoints_.end()) return;
  it->second.handler = nullptr;
  ++it->second.generation;
}

void SimFabric::record(char verdict, const Envelope& e) {
  std::string word = e.body.substr(0, e.body.find_first_of(" \r\n"));
  std::string line = std::to_string(now_.count()) + " " + verdict + " " + e.from + ">" + e.to +
                     " " + std::to_string(e.id) + " " + std::to_string(e.reply_to) + " " +
                     std::to_string(e.epoch) + " " + word;
  digest_.update(line);
  digest_.update("\n");
  if (verdict == 'D' || verdict == 'X' || verdict == 'P' || verdict == 'F') ++dropped_;
  else ++delivered_;
  if (keep_trace_) trace_.push_back(std::move(line));
}

void SimFabric::send(Envelope e) {
  if (e.id == 0) e.id = next_id();
  // Draw unconditionally so that the random stream does not depend on faults.
  const double drop_draw = uniform();
  const double jitter_draw = uniform();
  {
    std::lock_guard lock(state_mu_);
    auto from = endpoints_.find(e.from);
    if (from != endpoints_.end() && from->second.crashed) {
      record('X', e);
      return;
    }
    auto to = endpoints_.find(e.to);
    const bool infra =
        (from != endpoints_.end() && from->second.cls == EndpointClass::Infrastructure) ||
        (to != endpoints_.end() && to->second.cls == EndpointClass::Infrastructure);
    if (!infra && drop_draw < config_.drop_rate) {
      record('D', e);
      return;
    }
  }
  const auto base = config_.base_latency.count();
  // Latency is uniform over [base, 2*base] whole milliseconds.
  Millis at = now_ + Millis(base + static_cast<long long>(jitter_draw * static_cast<double>(base + 1)));
  auto key = std::make_pair(e.from, e.to);
  auto& last = last_delivery_[key];
  at = std::max(at, last);
  last = at;
  queue_.push(Event{at, ++seq_, [this, e = std::move(e)] { deliver(e, 0); }});
}

void SimFabric::deliver(const Envelope& e, std::uint64_t) {
  Handler handler;
  {
    std::lock_guard lock(state_mu_);
    if (auto verdict = filter_locked(e)) {
      record(*verdict, e);
      return;
    }
    auto& st = endpoints_.at(e.to);
    if (!st.handler) {
      record('X', e);
      return;
    }
    handler = st.handler;
  }
  record('>', e);
  observe(e, now_);
  handler(e);
}

std::uint64_t SimFabric::schedule(const std::string& endpoint, Millis delay, Task task) {
  std::uint64_t generation = 0;
  {
    std::lock_guard lock(state_mu_);
    auto it = endpoints_.find(endpoint);
    if (it != endpoints_.end()) generation = it->second.generation;
  }
  const std::uint64_t id = next_id();
  queue_.push(Event{now_ + std::max(delay, Millis(0)), ++seq_,
                    [this, id, endpoint, generation, task = std::move(task)] {
                      if (cancelled_.erase(id)) return;
                      {
                        std::lock_guard lock(state_mu_);
                        auto it = endpoints_.find(endpoint);
                        if (it == endpoints_.end() || it->second.crashed ||
                            it->second.generation != generation || !it->second.handler)
                          return;
                      }
                      task();
                    }});
  return id;
}

void SimFabric::cancel(std::uint64_t timer) { cancelled_.insert(timer); }

bool SimFabric::step() {
  if (queue_.empty()) return false;
  Event ev = queue_.top();
  queue_.pop();
  now_ = std::max(now_, ev.at);
  ev.run();
  return true;
}

void SimFabric::run_until(Millis deadline) {
  while (!queue_.empty() && queue_.top().at <= deadline) step();
  now_ = std::max(now_, deadline);
}

}  // namespace hacluster
