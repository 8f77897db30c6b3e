#include "hacluster/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hacluster {

using nlohmann::json;

std::string_view to_string(TopologyKind kind) {
  return kind == TopologyKind::TwoTier ? "two_tier" : "three_tier";
}

std::string backend_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "node%02d", index);
  return buf;
}

std::string member_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "hap%02d", index);
  return buf;
}

Deployment Deployment::standard(int backend_count, int member_count) {
  Deployment d;
  for (int i = 1; i <= member_count; ++i)
    d.cluster.members.push_back(MemberConfig{NodeId{member_name(i), i}, 1, ""});
  for (int i = 1; i <= backend_count; ++i) d.backends.push_back({backend_name(i), ""});
  return d;
}

namespace {

Millis ms(const json& j, const char* key, Millis fallback) {
  return j.contains(key) ? Millis(j.at(key).get<long long>()) : fallback;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

Deployment Deployment::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  Deployment d;
  try {
    if (doc.contains("cluster")) {
      const auto& c = doc.at("cluster");
      d.cluster.name = get_or<std::string>(c, "name", d.cluster.name);
      for (const auto& m : c.value("members", json::array())) {
        MemberConfig mc;
        mc.id.name = m.at("name").get<std::string>();
        mc.id.ordinal = m.at("ordinal").get<int>();
        mc.votes = get_or<int>(m, "votes", 1);
        mc.address = get_or<std::string>(m, "address", "");
        d.cluster.members.push_back(std::move(mc));
      }
      d.cluster.heartbeat_interval = ms(c, "heartbeat_interval_ms", d.cluster.heartbeat_interval);
      d.cluster.failure_window = ms(c, "failure_window_ms", d.cluster.failure_window);
      if (c.contains("two_node")) d.cluster.two_node = c.at("two_node").get<bool>();
      d.cluster.wait_for_all = get_or<bool>(c, "wait_for_all", d.cluster.wait_for_all);
      d.failback = get_or<bool>(c, "failback", d.failback);
    }
    if (doc.contains("service")) {
      const auto& s = doc.at("service");
      d.service.name = get_or<std::string>(s, "name", d.service.name);
      d.service.vip = get_or<std::string>(s, "vip", d.service.vip);
    }
    for (const auto& b : doc.value("backends", json::array()))
      d.backends.push_back({b.at("id").get<std::string>(), get_or<std::string>(b, "address", "")});
    if (doc.contains("store")) {
      const auto& s = doc.at("store");
      d.store.volume_id = get_or<std::string>(s, "volume", d.store.volume_id);
      d.store_directory = get_or<std::string>(s, "directory", d.store_directory);
      if (s.contains("exports")) {
        d.store.exports.clear();
        for (const auto& e : s.at("exports")) {
          ExportEntry entry;
          entry.export_path = e.at("path").get<std::string>();
          entry.client_pattern = e.at("clients").get<std::string>();
          const auto mode = get_or<std::string>(e, "mode", "rw");
          if (mode == "rw") entry.mode = ExportMode::ReadWrite;
          else if (mode == "ro") entry.mode = ExportMode::ReadOnly;
          else throw Error(Errc::InvalidConfig, "export mode must be rw or ro");
          d.store.exports.push_back(std::move(entry));
        }
      }
    }
    if (doc.contains("fabric")) {
      const auto& f = doc.at("fabric");
      const auto mode = get_or<std::string>(f, "mode", "simulated");
      if (mode == "simulated") d.fabric.mode = FabricMode::Simulated;
      else if (mode == "loopback" || mode == "real") d.fabric.mode = FabricMode::RealLoopback;
      else throw Error(Errc::InvalidConfig, "fabric.mode must be simulated or loopback");
      d.fabric.seed = get_or<std::uint64_t>(f, "seed", d.fabric.seed);
      d.fabric.base_latency = ms(f, "latency_ms", d.fabric.base_latency);
      d.fabric.drop_rate = get_or<double>(f, "drop_rate", d.fabric.drop_rate);
      d.fabric.base_port = get_or<int>(f, "base_port", d.fabric.base_port);
      d.fabric.fence_ack = get_or<bool>(f, "fence_ack", d.fabric.fence_ack);
    }
    if (doc.contains("topology")) {
      const auto& t = doc.at("topology");
      const auto kind = get_or<std::string>(t, "kind", "two_tier");
      if (kind == "two_tier") d.topology = TopologyKind::TwoTier;
      else if (kind == "three_tier") d.topology = TopologyKind::ThreeTier;
      else throw Error(Errc::InvalidConfig, "topology.kind must be two_tier or three_tier");
      d.store_node = get_or<std::string>(t, "store_node", d.store_node);
    }
    if (doc.contains("health")) {
      const auto& h = doc.at("health");
      d.health.interval = ms(h, "interval_ms", d.health.interval);
      d.health.timeout = ms(h, "timeout_ms", d.health.timeout);
      d.health.fall_count = get_or<int>(h, "fall", d.health.fall_count);
      d.health.rise_count = get_or<int>(h, "rise", d.health.rise_count);
    }
    if (doc.contains("timings")) {
      const auto& t = doc.at("timings");
      auto& x = d.timings;
      x.tick = ms(t, "tick_ms", x.tick);
      x.monitor_interval = ms(t, "monitor_interval_ms", x.monitor_interval);
      x.upstream_timeout = ms(t, "upstream_timeout_ms", x.upstream_timeout);
      x.client_timeout = ms(t, "client_timeout_ms", x.client_timeout);
      x.store_timeout = ms(t, "store_timeout_ms", x.store_timeout);
      x.registry_timeout = ms(t, "registry_timeout_ms", x.registry_timeout);
      x.fence_timeout = ms(t, "fence_timeout_ms", x.fence_timeout);
      x.fence_delay = ms(t, "fence_delay_ms", x.fence_delay);
      x.reboot_delay = ms(t, "reboot_delay_ms", x.reboot_delay);
      x.cooldown = ms(t, "cooldown_ms", x.cooldown);
      x.takeover_timeout = ms(t, "takeover_timeout_ms", x.takeover_timeout);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  d.validate();
  return d;
}

Deployment Deployment::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Deployment::to_json() const {
  json doc;
  json members = json::array();
  for (const auto& m : cluster.members) {
    json jm = {{"name", m.id.name}, {"ordinal", m.id.ordinal}, {"votes", m.votes}};
    if (!m.address.empty()) jm["address"] = m.address;
    members.push_back(jm);
  }
  doc["cluster"] = {{"name", cluster.name},
                    {"members", members},
                    {"heartbeat_interval_ms", cluster.heartbeat_interval.count()},
                    {"failure_window_ms", cluster.failure_window.count()},
                    {"wait_for_all", cluster.wait_for_all},
                    {"failback", failback}};
  if (cluster.two_node) doc["cluster"]["two_node"] = *cluster.two_node;
  doc["service"] = {{"name", service.name}, {"vip", service.vip}};
  json backs = json::array();
  for (const auto& b : backends) {
    json jb = {{"id", b.id}};
    if (!b.address.empty()) jb["address"] = b.address;
    backs.push_back(jb);
  }
  doc["backends"] = backs;
  json exports = json::array();
  for (const auto& e : store.exports)
    exports.push_back({{"path", e.export_path},
                       {"clients", e.client_pattern},
                       {"mode", e.mode == ExportMode::ReadWrite ? "rw" : "ro"}});
  doc["store"] = {{"volume", store.volume_id}, {"exports", exports}};
  if (!store_directory.empty()) doc["store"]["directory"] = store_directory;
  doc["fabric"] = {{"mode", fabric.mode == FabricMode::Simulated ? "simulated" : "loopback"},
                   {"seed", fabric.seed},
                   {"latency_ms", fabric.base_latency.count()},
                   {"drop_rate", fabric.drop_rate},
                   {"base_port", fabric.base_port},
                   {"fence_ack", fabric.fence_ack}};
  doc["topology"] = {{"kind", std::string(to_string(topology))}, {"store_node", store_node}};
  doc["health"] = {{"interval_ms", health.interval.count()},
                   {"timeout_ms", health.timeout.count()},
                   {"fall", health.fall_count},
                   {"rise", health.rise_count}};
  const auto& t = timings;
  doc["timings"] = {{"tick_ms", t.tick.count()},
                    {"monitor_interval_ms", t.monitor_interval.count()},
                    {"upstream_timeout_ms", t.upstream_timeout.count()},
                    {"client_timeout_ms", t.client_timeout.count()},
                    {"store_timeout_ms", t.store_timeout.count()},
                    {"registry_timeout_ms", t.registry_timeout.count()},
                    {"fence_timeout_ms", t.fence_timeout.count()},
                    {"fence_delay_ms", t.fence_delay.count()},
                    {"reboot_delay_ms", t.reboot_delay.count()},
                    {"cooldown_ms", t.cooldown.count()},
                    {"takeover_timeout_ms", t.takeover_timeout.count()}};
  return doc.dump(2) + "\n";
}

void Deployment::validate() const {
  cluster.validate();
  if (backends.empty() || backends.size() > kMaxBackends)
    throw Error(Errc::InvalidConfig, "backends: 1..16 entries required");
  if (service.vip.empty() || service.name.empty())
    throw Error(Errc::InvalidConfig, "service needs name and vip");
  std::set<std::string> names;
  auto claim = [&](const std::string& n) {
    if (!names.insert(n).second) throw Error(Errc::InvalidConfig, "duplicate endpoint name " + n);
  };
  for (const auto& m : cluster.members) claim(m.id.name);
  for (const auto& b : backends) claim(b.id);
  if (topology == TopologyKind::ThreeTier) claim(store_node);
  claim(std::string(kRegistryEndpoint));
  claim(std::string(kFenceEndpoint));
  if (store.exports.empty()) throw Error(Errc::InvalidConfig, "store needs at least one export");
  for (const auto& e : store.exports) e.validate();
  if (fabric.drop_rate < 0.0 || fabric.drop_rate > 1.0)
    throw Error(Errc::InvalidConfig, "drop_rate must be within [0,1]");
  if (health.fall_count < 1 || health.rise_count < 1)
    throw Error(Errc::InvalidConfig, "fall/rise counts must be >= 1");
}

std::size_t Deployment::node_count() const {
  return cluster.members.size() + backends.size() + (topology == TopologyKind::ThreeTier ? 1 : 0);
}

int Deployment::port_for(const std::string& endpoint) const {
  auto explicit_port = [](const std::string& address) -> int {
    auto colon = address.rfind(':');
    if (colon == std::string::npos) return 0;
    int port = 0;
    std::from_chars(address.data() + colon + 1, address.data() + address.size(), port);
    return port;
  };
  for (std::size_t i = 0; i < cluster.members.size(); ++i) {
    if (cluster.members[i].id.name != endpoint) continue;
    if (int p = explicit_port(cluster.members[i].address)) return p;
    return fabric.base_port + 1 + static_cast<int>(i);
  }
  for (std::size_t i = 0; i < backends.size(); ++i) {
    if (backends[i].id != endpoint) continue;
    if (int p = explicit_port(backends[i].address)) return p;
    return fabric.base_port + 20 + static_cast<int>(i);
  }
  if (endpoint == store_node) return fabric.base_port + 60;
  if (endpoint == kRegistryEndpoint) return fabric.base_port + 70;
  if (endpoint == kFenceEndpoint) return fabric.base_port + 71;
  Fnv1a h;
  h.update(endpoint);
  return fabric.base_port + 100 + static_cast<int>(h.value() % 400);
}

}  // namespace hacluster
