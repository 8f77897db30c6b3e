#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hacluster/common.hpp"
#include "hacluster/membership.hpp"

namespace hacluster {

enum class ResourceKind { VirtualEndpoint, SharedStore, Balancer };
enum class ResourceStatus { Stopped, Running, Failed };
enum class GroupState { Stopped, Starting, Started, Stopping, Relocating, Failed };

std::string_view to_string(ResourceKind kind);
std::string_view to_string(ResourceStatus status);
std::string_view to_string(GroupState state);
std::optional<ResourceKind> parse_resource_kind(std::string_view text);

struct ResourceRef {
  ResourceKind kind;
  ResourceStatus status = ResourceStatus::Stopped;

  friend bool operator==(const ResourceRef&, const ResourceRef&) = default;
};

/// The service group (`service:HAPC`): ordered resources with one owner.
struct ResourceGroup {
  std::string name = "HAPC";
  std::vector<ResourceRef> resources;
  std::optional<std::string> owner;
  std::uint64_t term = 0;
  GroupState state = GroupState::Stopped;
};

struct Action {
  enum class Kind { StartLocally, StopLocally, Fence, Relocate };
  Kind kind;
  std::string node;  // Fence / Relocate target

  static Action start() { return {Kind::StartLocally, {}}; }
  static Action stop() { return {Kind::StopLocally, {}}; }
  static Action fence(std::string n) { return {Kind::Fence, std::move(n)}; }
  static Action relocate(std::string n) { return {Kind::Relocate, std::move(n)}; }

  friend bool operator==(const Action&, const Action&) = default;
};

std::string to_string(const Action& a);

/// Everything the placement planner looks at.
struct PlannerInput {
  MembershipSnapshot membership;
  ResourceGroup group;  // the local node's view
  std::optional<std::string> last_owner;
  std::uint64_t last_owner_term = 0;
  // Peers seen going Offline that have not been fenced yet.
  std::set<std::string> needs_fence;
  // Highest epoch at which each node has been confirmed fenced by us.
  std::map<std::string, std::uint64_t> fenced_through;
  // Nodes in start-failure cooldown.
  std::set<std::string> excluded;
  bool failback = false;
};

/// Pure planner. Placement is the lowest-ordinal Online member that is not
/// excluded; without quorum the local node only ever stops.
std::vector<Action> evaluate(const PlannerInput& in);

/// Which member currently runs the group, judged from the local view.
std::optional<std::string> live_owner(const PlannerInput& in);

// ---------------------------------------------------------------------------

/// A startable/stoppable resource. Completion callbacks may fire synchronously
/// or later from the owner's event queue.
class Resource {
 public:
  virtual ~Resource() = default;
  virtual ResourceKind kind() const = 0;
  virtual void start(std::uint64_t term, std::function<void(bool ok)> done) = 0;
  virtual void stop(std::function<void()> done) = 0;
  virtual bool healthy() const = 0;
  virtual ResourceStatus status() const = 0;
};

struct LifecycleEvent {
  Millis at{0};
  std::string node;
  ResourceKind kind;
  bool start = true;  // false: stop
  bool ok = true;
  bool reset = false;  // node crashed/rebooted: its resources are gone
};

/// Append-only lifecycle record shared across nodes (test/harness observer).
class LifecycleLog {
 public:
  void append(LifecycleEvent e);
  void node_reset(const std::string& node, Millis at);
  std::vector<LifecycleEvent> events() const;

  /// Every start sequence runs endpoint->store->balancer (prefix on failure)
  /// and every stop sequence is the exact reverse of what had started.
  bool ordered(const std::vector<ResourceKind>& order) const;

 private:
  mutable std::mutex mu_;
  std::vector<LifecycleEvent> events_;
};

/// Runs a resource list in order with reverse-order rollback and stop.
class GroupController {
 public:
  using StartDone = std::function<void(std::optional<ResourceKind> failed)>;
  using Clock = std::function<Millis()>;

  GroupController(std::string node, std::vector<Resource*> resources, LifecycleLog* log,
                  Clock clock);

  /// Throws NotQuorate without touching any resource.
  void start(bool quorate, std::uint64_t term, StartDone done);
  void stop(std::function<void()> done);

  /// First unhealthy resource in start order (a FailureEvent), if any.
  std::optional<ResourceKind> monitor() const;

  std::vector<ResourceRef> refs() const;
  bool busy() const { return busy_; }

 private:
  void start_from(std::size_t index, std::uint64_t term, StartDone done);
  void stop_from(std::size_t count, std::function<void()> done);
  void log(ResourceKind kind, bool start, bool ok);

  std::string node_;
  std::vector<Resource*> resources_;
  LifecycleLog* log_;
  Clock clock_;
  bool busy_ = false;
};

/// Records who believed it owned the group and when (safety checking).
class OwnershipLog {
 public:
  struct Record {
    std::string node;
    std::uint64_t term = 0;
    Millis start{0};
    std::optional<Millis> end;
  };

  void started(const std::string& node, std::uint64_t term, Millis at);
  void ended(const std::string& node, Millis at);
  std::vector<Record> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<Record> records_;
};

}  // namespace hacluster
