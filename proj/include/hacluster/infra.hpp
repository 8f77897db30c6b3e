#pragma once

#include <functional>
#include <memory>
#include <string>

#include "hacluster/actor.hpp"
#include "hacluster/config.hpp"
#include "hacluster/shared_store.hpp"
#include "hacluster/virtual_endpoint.hpp"

namespace hacluster {

/// VIP ownership registry on the fabric. Refuses binds from a node that is
/// fenced at the incarnation it reports.
class RegistryActor final : public Actor {
 public:
  explicit RegistryActor(Fabric& fabric, std::string name = std::string(kRegistryEndpoint));

  VipRegistry& registry() { return registry_; }
  const VipRegistry& registry() const { return registry_; }

 protected:
  void on_message(const Envelope& e) override;

 private:
  VipRegistry registry_;
};

/// Power-fence device shared by the balancer nodes.
///
/// A request from a higher-ordinal node against a lower-ordinal one waits
/// `fence_delay` first, so in a symmetric split the lower ordinal wins. A
/// requester that has itself been fenced at its current incarnation is refused.
class FenceDevice final : public Actor {
 public:
  using OrdinalOf = std::function<int(const std::string&)>;
  using EpochHint = std::function<std::uint64_t()>;

  FenceDevice(Fabric& fabric, Millis fence_delay, OrdinalOf ordinal_of, EpochHint epoch_hint,
              std::string name = std::string(kFenceEndpoint));

 protected:
  void on_message(const Envelope& e) override;

 private:
  void execute(const Envelope& request);

  Millis fence_delay_;
  OrdinalOf ordinal_of_;
  EpochHint epoch_hint_;
};

/// Dedicated store server of the three-tier baseline. Always runs at epoch 1.
class StoreNode final : public Actor {
 public:
  StoreNode(Fabric& fabric, const std::string& name, StoreConfig config, std::shared_ptr<San> san);

  StoreServer& server() { return server_; }

 protected:
  void on_message(const Envelope& e) override;

 private:
  StoreServer server_;
};

}  // namespace hacluster
