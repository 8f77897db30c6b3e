#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "hacluster/common.hpp"

namespace hacluster {

/// One message on the fabric. `epoch` stamps service traffic with the
/// ownership term it belongs to; control traffic carries 0.
struct Envelope {
  std::string from;
  std::string to;
  std::uint64_t id = 0;
  std::uint64_t reply_to = 0;
  std::uint64_t epoch = 0;
  std::string body;
};

enum class EndpointClass {
  Node,            // subject to crashes and partitions
  Infrastructure,  // registry, fence device, harness: always reachable
};

enum class FabricMode { RealLoopback, Simulated };

struct FabricConfig {
  FabricMode mode = FabricMode::Simulated;
  std::uint64_t seed = 1;
  Millis base_latency{1};
  double drop_rate = 0.0;
  int base_port = 17100;
  bool fence_ack = true;
};

struct FenceMark {
  std::uint64_t epoch = 0;
  std::uint64_t incarnation = 0;
  Millis at{0};
};

/// Fence state shared by the fence device and the fabric's delivery filter.
class FenceTable {
 public:
  struct Event {
    std::string node;
    std::uint64_t epoch;
    Millis at;
  };

  void fence(const std::string& node, std::uint64_t epoch, std::uint64_t incarnation, Millis at);
  std::optional<FenceMark> mark(const std::string& node) const;
  /// Service traffic stamped `epoch` from/to `node` must not be delivered.
  bool blocks(const std::string& node, std::uint64_t epoch) const;
  std::vector<Event> events() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, FenceMark> marks_;
  std::vector<Event> events_;
};

struct Partition {
  std::vector<std::set<std::string>> groups;
  bool active = false;

  /// Throws InvalidConfig when groups overlap.
  void validate() const;
  /// Endpoints named in different groups cannot talk; unnamed ones reach everyone.
  bool separates(const std::string& a, const std::string& b) const;
};

namespace fault {
struct Crash { std::string node; };
struct Restart { std::string node; };
struct PartitionGroups { std::vector<std::set<std::string>> groups; };
struct Heal {};
struct KillProcess { std::string node; std::string resource; };
struct DetachVolume { std::optional<std::string> node; };
struct ReattachVolume { std::optional<std::string> node; };
struct FenceAck { bool enabled; };
}  // namespace fault

using Fault = std::variant<fault::Crash, fault::Restart, fault::PartitionGroups, fault::Heal,
                           fault::KillProcess, fault::DetachVolume, fault::ReattachVolume,
                           fault::FenceAck>;

std::string describe(const Fault& f);

/// Transport contract every module depends on. Handlers and timers for one
/// endpoint never run concurrently with each other.
class Fabric {
 public:
  using Handler = std::function<void(const Envelope&)>;
  using Task = std::function<void()>;
  using DeliveryObserver = std::function<void(const Envelope&, Millis at)>;
  // Applies faults that need node knowledge (KillProcess, DetachVolume, Restart).
  using FaultSink = std::function<void(const Fault&)>;

  virtual ~Fabric() = default;

  virtual void attach(const std::string& endpoint, Handler handler, EndpointClass cls) = 0;
  virtual void detach(const std::string& endpoint) = 0;
  virtual void send(Envelope envelope) = 0;
  virtual Millis now() const = 0;
  virtual std::uint64_t schedule(const std::string& endpoint, Millis delay, Task task) = 0;
  virtual void cancel(std::uint64_t timer) = 0;
  virtual std::uint64_t next_id() = 0;
  virtual FabricMode mode() const = 0;

  /// Crash/Partition/Heal/FenceAck are handled here; the rest go to the fault sink.
  /// Throws UnknownNode for crash/restart/kill of an unknown endpoint.
  void inject(const Fault& f);

  void set_fault_sink(FaultSink sink);
  void set_delivery_observer(DeliveryObserver observer);

  FenceTable& fences() { return fences_; }
  const FenceTable& fences() const { return fences_; }
  bool fence_ack() const;
  bool known(const std::string& endpoint) const;
  bool crashed(const std::string& endpoint) const;

 protected:
  struct EndpointState {
    Handler handler;
    EndpointClass cls = EndpointClass::Node;
    std::uint64_t generation = 0;
    bool crashed = false;
  };

  /// Routing verdict shared by both implementations; nullopt means deliverable.
  std::optional<char> filter_locked(const Envelope& e) const;
  void observe(const Envelope& e, Millis at);

  mutable std::recursive_mutex state_mu_;
  std::map<std::string, EndpointState> endpoints_;
  Partition partition_;
  bool fence_ack_ = true;
  FenceTable fences_;
  FaultSink fault_sink_;
  DeliveryObserver observer_;
};

/// Deterministic single-threaded simulated network with a virtual clock.
///
/// Per sender/receiver pair delivery is FIFO. Equal seeds and equal inputs
/// produce identical traces.
class SimFabric final : public Fabric {
 public:
  explicit SimFabric(FabricConfig config = {});

  void attach(const std::string& endpoint, Handler handler, EndpointClass cls) override;
  void detach(const std::string& endpoint) override;
  void send(Envelope envelope) override;
  Millis now() const override { return now_; }
  std::uint64_t schedule(const std::string& endpoint, Millis delay, Task task) override;
  void cancel(std::uint64_t timer) override;
  std::uint64_t next_id() override { return ++ids_; }
  FabricMode mode() const override { return FabricMode::Simulated; }

  /// Runs events with time <= deadline, then advances the clock to deadline.
  void run_until(Millis deadline);
  void run_for(Millis span) { run_until(now_ + span); }
  bool step();

  std::uint64_t digest() const { return digest_.value(); }
  const std::vector<std::string>& trace() const { return trace_; }
  void keep_trace(bool keep) { keep_trace_ = keep; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t dropped() const { return dropped_; }

  /// Uniform double in [0, 1) from the fabric's seeded generator.
  double uniform();

 private:
  struct Event {
    Millis at;
    std::uint64_t seq;
    std::function<void()> run;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void record(char verdict, const Envelope& e);
  void deliver(const Envelope& e, std::uint64_t generation);

  FabricConfig config_;
  Millis now_{0};
  std::uint64_t seq_ = 0;
  std::uint64_t ids_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<std::pair<std::string, std::string>, Millis> last_delivery_;
  std::set<std::uint64_t> cancelled_;
  std::mt19937_64 rng_;
  Fnv1a digest_;
  std::vector<std::string> trace_;
  bool keep_trace_ = false;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
};

}  // namespace hacluster
