#include "hacluster/topology.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

namespace hacluster {

// Deferred work that must not run inside another actor's handler.
class Topology::Harness final : public Actor {
 public:
  explicit Harness(Fabric& fabric) : Actor(fabric, "harness", EndpointClass::Infrastructure) {
    attach();
  }
  ~Harness() override { detach(); }
  void later(Millis delay, std::function<void()> fn) { after(delay, std::move(fn)); }

 protected:
  void on_message(const Envelope&) override {}
};

namespace {

std::string random_page(std::mt19937_64& rng, int index) {
  static constexpr char kAlphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:-_";
  std::uniform_int_distribution<int> len(64, 512);
  std::uniform_int_distribution<int> pick(0, sizeof(kAlphabet) - 2);
  std::string text(len(rng), ' ');
  for (char& c : text) c = kAlphabet[pick(rng)];
  return "<html><body><p>page " + std::to_string(index) + "</p><p>" + text +
         "</p></body></html>\n";
}

}  // namespace

Topology::Topology(Deployment deployment, Fabric& fabric, Options options)
    : dep_(std::move(deployment)), fabric_(fabric), options_(options) {
  dep_.validate();
  san_ = std::make_shared<San>();
  auto storage = dep_.store_directory.empty() ? make_memory_storage()
                                              : make_directory_storage(dep_.store_directory);
  auto vol = san_->add(dep_.store.volume_id, std::move(storage));

  seeded_["/index.html"] = "<html><body><h1>" + dep_.service.name +
                           "</h1><p>served from the shared export</p></body></html>\n";
  std::mt19937_64 rng(options_.content_seed);
  for (int i = 0; i < options_.content_files; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "/f/%03d.html", i);
    seeded_[name] = random_page(rng, i);
  }
  const std::string root = dep_.store.exports.front().export_path;
  for (const auto& [path, bytes] : seeded_) vol->seed(root + path, bytes);

  fabric_.set_fault_sink([this](const Fault& f) { apply(f); });
  fabric_.set_delivery_observer([this](const Envelope& e, Millis at) {
    if (e.epoch == 0 || !e.body.starts_with("HTTP/")) return;
    if (!e.to.starts_with("client") && e.to != "loadgen") return;
    std::lock_guard lock(deliveries_mu_);
    deliveries_.push_back({at, e.to, e.from, e.epoch});
  });
}

Topology::~Topology() {
  std::lock_guard lock(actors_mu_);
  fabric_.set_fault_sink(nullptr);
  fabric_.set_delivery_observer(nullptr);
  harness_.reset();
  members_.clear();
  backends_.clear();
  clients_.clear();
  store_node_.reset();
  fence_.reset();
}

void Topology::boot() {
  std::lock_guard lock(actors_mu_);
  harness_ = std::make_unique<Harness>(fabric_);
  registry_ = std::make_unique<RegistryActor>(fabric_);
  auto ordinal_of = [this](const std::string& name) {
    const auto* m = dep_.cluster.find(name);
    return m ? m->id.ordinal : 0;
  };
  auto epoch_hint = [this] { return registry_->registry().epoch(dep_.service.vip); };
  fence_ = std::make_unique<FenceDevice>(fabric_, dep_.timings.fence_delay, ordinal_of, epoch_hint);
  if (dep_.topology == TopologyKind::ThreeTier)
    store_node_ = std::make_unique<StoreNode>(fabric_, dep_.store_node, dep_.store, san_);
  for (const auto& b : dep_.backends) start_backend(b.id);
  for (const auto& m : dep_.cluster.members) start_member(m.id.name);
}

bool Topology::is_member(const std::string& name) const { return dep_.cluster.find(name); }

bool Topology::is_backend(const std::string& name) const {
  return std::any_of(dep_.backends.begin(), dep_.backends.end(),
                     [&](const BackendConfig& b) { return b.id == name; });
}

void Topology::start_member(const std::string& name) {
  ClusterNode::Env env;
  env.deployment = &dep_;
  env.san = san_;
  env.lifecycle = &lifecycle_;
  env.ownership = &ownership_;
  env.power_off = [this](const std::string& node) { power_off(node); };
  env.wall_clock = [this] { return options_.wall_base + fabric_.now().count(); };
  const std::uint64_t previous = incarnations_[name];
  auto node = std::make_unique<ClusterNode>(fabric_, name, previous, std::move(env));
  incarnations_[name] = node->incarnation();
  auto* raw = node.get();
  members_[name] = std::move(node);
  raw->boot();
}

void Topology::start_backend(const std::string& id) {
  WebBackend::Options opt;
  opt.vip = dep_.service.vip;
  opt.export_path = dep_.store.exports.front().export_path;
  if (dep_.topology == TopologyKind::ThreeTier) opt.store_node = dep_.store_node;
  opt.store_timeout = dep_.timings.store_timeout;
  opt.registry_timeout = dep_.timings.registry_timeout;
  auto b = std::make_unique<WebBackend>(fabric_, id, opt);
  auto* raw = b.get();
  backends_[id] = std::move(b);
  raw->boot();
}

ClusterNode* Topology::member(const std::string& name) {
  std::lock_guard lock(actors_mu_);
  auto it = members_.find(name);
  return it == members_.end() ? nullptr : it->second.get();
}

WebBackend* Topology::backend(const std::string& id) {
  std::lock_guard lock(actors_mu_);
  auto it = backends_.find(id);
  return it == backends_.end() ? nullptr : it->second.get();
}

Client& Topology::client(const std::string& name) {
  std::lock_guard lock(actors_mu_);
  auto& c = clients_[name];
  if (!c) {
    Client::Options opt;
    opt.vip = dep_.service.vip;
    opt.request_timeout = dep_.timings.client_timeout;
    opt.registry_timeout = dep_.timings.registry_timeout;
    opt.store_timeout = dep_.timings.store_timeout;
    if (dep_.topology == TopologyKind::ThreeTier) opt.store_node = dep_.store_node;
    c = std::make_unique<Client>(fabric_, name, opt);
  }
  return *c;
}

std::shared_ptr<Volume> Topology::volume() const { return san_->get(dep_.store.volume_id); }

std::optional<Resolution> Topology::owner() const {
  try {
    return registry_->registry().resolve(dep_.service.vip);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::string> Topology::live_members() {
  std::lock_guard lock(actors_mu_);
  std::vector<std::string> out;
  auto o = owner();
  if (o && members_.contains(o->owner)) out.push_back(o->owner);
  for (const auto& m : dep_.cluster.members)
    if (members_.contains(m.id.name) && (!o || o->owner != m.id.name)) out.push_back(m.id.name);
  return out;
}

std::optional<std::string> Topology::volume_file(const std::string& doc_path) const {
  auto all = volume()->contents();
  auto it = all.find(dep_.store.exports.front().export_path + doc_path);
  if (it == all.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Faults

void Topology::apply(const Fault& f) {
  std::lock_guard lock(actors_mu_);
  if (auto* c = std::get_if<fault::Crash>(&f)) return crash(c->node);
  if (auto* r = std::get_if<fault::Restart>(&f)) return restart(r->node);
  if (auto* k = std::get_if<fault::KillProcess>(&f)) {
    if (auto* m = member(k->node)) {
      auto kind = parse_resource_kind(k->resource);
      if (!kind) throw Error(Errc::InvalidConfig, "unknown resource " + k->resource);
      m->kill_resource(*kind);
    } else if (auto* b = backend(k->node)) {
      b->kill();
    }
    return;
  }
  if (auto* d = std::get_if<fault::DetachVolume>(&f)) {
    std::string node;
    if (d->node) node = *d->node;
    else if (auto h = volume()->holder(); !h.node.empty()) node = h.node;
    else if (auto o = owner()) node = o->owner;
    if (!node.empty()) volume()->set_path_failed(node, true);
    return;
  }
  if (auto* r = std::get_if<fault::ReattachVolume>(&f)) {
    if (r->node) {
      volume()->set_path_failed(*r->node, false);
    } else {
      for (const auto& m : dep_.cluster.members) volume()->set_path_failed(m.id.name, false);
      volume()->set_path_failed(dep_.store_node, false);
    }
  }
}

void Topology::crash(const std::string& node) {
  if (is_member(node)) {
    ownership_.ended(node, fabric_.now());
    lifecycle_.node_reset(node, fabric_.now());
    members_.erase(node);
  } else if (is_backend(node)) {
    backends_.erase(node);
  }
}

void Topology::restart(const std::string& node) {
  if (is_member(node)) {
    if (members_.contains(node)) crash(node);
    start_member(node);
  } else if (is_backend(node)) {
    backends_.erase(node);
    start_backend(node);
  }
}

void Topology::power_off(const std::string& node) {
  harness_->later(Millis(0), [this, node] {
    {
      std::lock_guard lock(actors_mu_);
      if (!members_.contains(node)) return;
    }
    fabric_.inject(fault::Crash{node});
    harness_->later(dep_.timings.reboot_delay,
                    [this, node] { fabric_.inject(fault::Restart{node}); });
  });
}

// ---------------------------------------------------------------------------
// Safety

std::vector<ClientDelivery> Topology::deliveries() const {
  std::lock_guard lock(deliveries_mu_);
  return deliveries_;
}

SafetyReport Topology::safety() const {
  SafetyReport r;
  const auto fences = fabric_.fences().events();
  const auto history = registry_->registry().history();
  std::map<std::uint64_t, std::string> bound;
  for (const auto& b : history) {
    auto [it, fresh] = bound.emplace(b.epoch, b.owner);
    if (!fresh && it->second != b.owner)
      r.violations.push_back("epoch " + std::to_string(b.epoch) + " bound to two nodes");
  }

  std::map<std::uint64_t, std::set<std::string>> owners;
  for (const auto& rec : ownership_.records()) owners[rec.term].insert(rec.node);
  for (const auto& [term, nodes] : owners)
    if (nodes.size() > 1)
      r.violations.push_back("term " + std::to_string(term) + " owned by " +
                             std::to_string(nodes.size()) + " nodes");

  std::map<std::string, std::uint64_t> newest;
  for (const auto& d : deliveries()) {
    for (const auto& ev : fences)
      if (ev.node == d.origin && ev.epoch >= d.epoch && ev.at <= d.at)
        r.violations.push_back("response from fenced " + d.origin + " epoch " +
                               std::to_string(d.epoch) + " at " + std::to_string(d.at.count()));
    auto it = bound.find(d.epoch);
    if (it == bound.end() || it->second != d.origin)
      r.violations.push_back("response from non-owner " + d.origin + " epoch " +
                             std::to_string(d.epoch));
    auto& top = newest[d.client];
    if (d.epoch < top)
      r.violations.push_back(d.client + " saw epoch " + std::to_string(d.epoch) + " after " +
                             std::to_string(top));
    top = std::max(top, d.epoch);
  }

  const std::vector<ResourceKind> order =
      dep_.topology == TopologyKind::TwoTier
          ? std::vector<ResourceKind>{ResourceKind::VirtualEndpoint, ResourceKind::SharedStore,
                                      ResourceKind::Balancer}
          : std::vector<ResourceKind>{ResourceKind::VirtualEndpoint, ResourceKind::Balancer};
  if (!lifecycle_.ordered(order)) r.violations.push_back("resource lifecycle out of order");
  return r;
}

}  // namespace hacluster
