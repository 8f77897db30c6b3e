#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hacluster/actor.hpp"
#include "hacluster/balancer.hpp"
#include "hacluster/config.hpp"
#include "hacluster/membership.hpp"
#include "hacluster/service_manager.hpp"
#include "hacluster/shared_store.hpp"
#include "hacluster/status.hpp"

namespace hacluster {

/// One load-balancer cluster member: heartbeats, placement, fencing, and the
/// HAPC resource group (virtual endpoint, embedded store, balancer).
class ClusterNode final : public Actor {
 public:
  struct Env {
    const Deployment* deployment = nullptr;
    std::shared_ptr<San> san;  // unused in the three-tier topology
    LifecycleLog* lifecycle = nullptr;
    OwnershipLog* ownership = nullptr;
    // Called when the fence device powers this node off; the owner of the
    // node object power-cycles it later. Must not destroy the node synchronously.
    std::function<void(const std::string&)> power_off;
    std::function<std::int64_t()> wall_clock;
  };

  ClusterNode(Fabric& fabric, const std::string& name, std::uint64_t previous_incarnation,
              Env env);
  ~ClusterNode() override;

  /// Attaches to the fabric and arms the heartbeat, tick and monitor timers.
  void boot();

  /// Application failure: the resource's daemon dies and stays dead until restarted.
  void kill_resource(ResourceKind kind);

  StatusReport status() const;
  ResourceGroup group() const { return group_; }
  MembershipSnapshot membership() const { return membership_.snapshot(); }
  std::uint64_t incarnation() const { return membership_.incarnation(); }
  bool serving() const;
  std::optional<BalancerStats> balancer_stats() const;
  std::vector<ResourceKind> resource_order() const;

 protected:
  void on_message(const Envelope& e) override;

 private:
  class EndpointResource;
  class StoreResource;
  class BalancerResource;

  const Deployment& dep() const { return *env_.deployment; }
  bool two_tier() const { return dep().topology == TopologyKind::TwoTier; }

  void heartbeat_loop();
  void tick_loop();
  void monitor_loop();
  void send_heartbeats();
  void on_tick();
  void on_heartbeat(const Envelope& e);
  void on_monitor();
  void reconcile();
  PlannerInput planner_input() const;

  void fence(const std::string& victim, std::function<void(bool)> done);
  void claim();
  void start_group(std::uint64_t term);
  void stop_group(std::function<void()> done);
  void hand_off(std::uint64_t term);
  void on_takeover(const Envelope& e);
  void on_relocate(const Envelope& e);
  void on_fenced(const Envelope& e);
  void demote();

  void on_http(const Envelope& e);
  void forward(const Envelope& client, http::Request req, Balancer::Decision decision, int attempt,
               std::shared_ptr<Balancer> bal, std::uint64_t term);
  void on_store(const Envelope& e);
  void probe_backends(std::uint64_t run);

  bool excluded(const std::string& node) const;
  std::optional<std::string> handoff_target() const;
  bool owner_active() const;

  Env env_;
  Membership membership_;
  ResourceGroup group_;
  std::uint64_t known_term_ = 0;
  std::optional<std::string> last_owner_;
  std::uint64_t last_owner_term_ = 0;
  std::set<std::string> needs_fence_;
  std::set<std::string> fencing_;
  std::map<std::string, std::uint64_t> fenced_through_;
  std::map<std::string, std::uint64_t> fenced_incarnation_;
  std::map<std::string, Millis> excluded_until_;
  bool busy_ = false;
  bool halted_ = false;

  StoreServer store_;
  std::shared_ptr<Balancer> balancer_;
  std::uint64_t balancer_run_ = 0;
  std::unique_ptr<EndpointResource> endpoint_res_;
  std::unique_ptr<StoreResource> store_res_;
  std::unique_ptr<BalancerResource> balancer_res_;
  std::unique_ptr<GroupController> controller_;
};

}  // namespace hacluster
