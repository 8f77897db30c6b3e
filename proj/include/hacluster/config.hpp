#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hacluster/balancer.hpp"
#include "hacluster/fabric.hpp"
#include "hacluster/membership.hpp"
#include "hacluster/shared_store.hpp"

namespace hacluster {

enum class TopologyKind { TwoTier, ThreeTier };

std::string_view to_string(TopologyKind kind);

struct ServiceConfig {
  std::string name = "HAPC";
  std::string vip = "192.168.1.20";
};

struct BackendConfig {
  std::string id;
  std::string address;
};

/// Protocol timeouts and periods; defaults are sized for desk-scale failover.
struct Timings {
  Millis tick{100};
  Millis monitor_interval{500};
  Millis upstream_timeout{1500};
  Millis client_timeout{2000};
  Millis store_timeout{300};
  Millis registry_timeout{500};
  Millis fence_timeout{3000};
  Millis fence_delay{1000};  // tie-break delay for higher-ordinal requesters
  Millis reboot_delay{2000};
  Millis cooldown{10000};
  Millis takeover_timeout{5000};
};

/// Whole-deployment configuration (JSON document; see configs/).
struct Deployment {
  ClusterConfig cluster;
  ServiceConfig service;
  std::vector<BackendConfig> backends;
  StoreConfig store;
  std::string store_directory;  // real mode: backing directory of the shared volume
  FabricConfig fabric;
  TopologyKind topology = TopologyKind::TwoTier;
  std::string store_node = "nfs01";
  HealthPolicy health;
  Timings timings;
  bool failback = false;

  /// Two balancer nodes hap01/hap02 and `backend_count` backends node01..
  static Deployment standard(int backend_count = 2, int member_count = 2);

  static Deployment parse(std::string_view json_text);
  static Deployment load(const std::filesystem::path& path);
  std::string to_json() const;

  /// Throws InvalidConfig (or DuplicateOrdinal) on inconsistent settings.
  void validate() const;

  /// Number of machines the topology needs (balancers + backends + store node).
  std::size_t node_count() const;
  /// Deterministic loopback port for an endpoint name.
  int port_for(const std::string& endpoint) const;
};

inline constexpr std::string_view kRegistryEndpoint = "registry";
inline constexpr std::string_view kFenceEndpoint = "fence";

std::string backend_name(int index);  // 1 -> "node01"
std::string member_name(int index);   // 1 -> "hap01"

}  // namespace hacluster
