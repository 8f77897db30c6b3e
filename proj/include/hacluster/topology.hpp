#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hacluster/client.hpp"
#include "hacluster/cluster_node.hpp"
#include "hacluster/config.hpp"
#include "hacluster/infra.hpp"
#include "hacluster/status.hpp"
#include "hacluster/web_backend.hpp"

namespace hacluster {

/// Virtual time zero, rendered as wall-clock time in status output (2026-01-01 UTC).
inline constexpr std::int64_t kSimWallBase = 1767225600000;

/// A response observed by a client, kept for the safety checks.
struct ClientDelivery {
  Millis at{0};
  std::string client;
  std::string origin;
  std::uint64_t epoch = 0;
};

struct SafetyReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Builds and owns every actor of a deployment on one fabric, applies faults
/// that need node knowledge, and checks the cluster-wide safety properties.
class Topology {
 public:
  struct Options {
    std::int64_t wall_base = kSimWallBase;  // added to fabric time for status stamps
    std::uint64_t content_seed = 1;
    int content_files = 100;
  };

  Topology(Deployment deployment, Fabric& fabric, Options options);
  Topology(Deployment deployment, Fabric& fabric) : Topology(std::move(deployment), fabric, Options{}) {}
  ~Topology();

  Topology(const Topology&) = delete;
  Topology& operator=(const Topology&) = delete;

  /// Starts infrastructure, backends and cluster members.
  void boot();

  const Deployment& deployment() const { return dep_; }
  Fabric& fabric() { return fabric_; }

  ClusterNode* member(const std::string& name);
  WebBackend* backend(const std::string& id);
  Client& client(const std::string& name = "client1");
  RegistryActor& registry() { return *registry_; }
  std::shared_ptr<Volume> volume() const;
  std::shared_ptr<San> san() const { return san_; }
  LifecycleLog& lifecycle() { return lifecycle_; }
  OwnershipLog& ownership() { return ownership_; }

  /// Current vip binding straight from the registry.
  std::optional<Resolution> owner() const;
  /// Node that should answer `status` right now (owner first, then any live member).
  std::vector<std::string> live_members();

  /// Files placed on the export at boot: path -> bytes ("/index.html", "/f/000.html", ...).
  const std::map<std::string, std::string>& seeded_files() const { return seeded_; }
  /// Ground truth for a document path, read straight from the volume.
  std::optional<std::string> volume_file(const std::string& doc_path) const;

  /// Fence soundness, one owner per epoch, standby dormancy, lifecycle order.
  SafetyReport safety() const;
  std::vector<ClientDelivery> deliveries() const;
  std::size_t node_count() const { return dep_.node_count(); }

 private:
  class Harness;

  void apply(const Fault& f);
  void crash(const std::string& node);
  void restart(const std::string& node);
  void start_member(const std::string& name);
  void start_backend(const std::string& id);
  void power_off(const std::string& node);
  bool is_member(const std::string& name) const;
  bool is_backend(const std::string& name) const;

  Deployment dep_;
  Fabric& fabric_;
  Options options_;
  std::shared_ptr<San> san_;
  LifecycleLog lifecycle_;
  OwnershipLog ownership_;
  std::unique_ptr<Harness> harness_;
  std::unique_ptr<RegistryActor> registry_;
  std::unique_ptr<FenceDevice> fence_;
  std::unique_ptr<StoreNode> store_node_;
  std::map<std::string, std::unique_ptr<ClusterNode>> members_;
  std::map<std::string, std::uint64_t> incarnations_;  // survives crashes, like a disk
  std::map<std::string, std::unique_ptr<WebBackend>> backends_;
  std::map<std::string, std::unique_ptr<Client>> clients_;
  std::map<std::string, std::string> seeded_;

  // Actor maps change from the harness and driver strands in loopback mode.
  mutable std::recursive_mutex actors_mu_;
  mutable std::mutex deliveries_mu_;
  std::vector<ClientDelivery> deliveries_;
};

}  // namespace hacluster
