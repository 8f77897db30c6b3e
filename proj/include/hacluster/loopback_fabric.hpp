#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>

#include "hacluster/fabric.hpp"

namespace hacluster {

/// Real TCP transport on 127.0.0.1. Each attached endpoint listens on its own
/// port and runs handlers and timers on a private strand thread. One frame per
/// connection; a sender writes frames to one receiver in order, so per-pair
/// delivery stays FIFO.
class LoopbackFabric final : public Fabric {
 public:
  /// Port for endpoints that are not attached in this process.
  using PortOf = std::function<int(const std::string&)>;

  LoopbackFabric(FabricConfig config, PortOf port_of);
  ~LoopbackFabric() override;

  void attach(const std::string& endpoint, Handler handler, EndpointClass cls) override;
  /// Waits until the endpoint's strand is idle, unless called from that strand.
  void detach(const std::string& endpoint) override;
  void send(Envelope envelope) override;
  Millis now() const override;
  std::uint64_t schedule(const std::string& endpoint, Millis delay, Task task) override;
  void cancel(std::uint64_t timer) override;
  std::uint64_t next_id() override { return ++ids_; }
  FabricMode mode() const override { return FabricMode::RealLoopback; }

  /// Port the endpoint listens on here, 0 when not attached.
  int port(const std::string& endpoint) const;

  static std::string encode(const Envelope& e);
  static std::optional<Envelope> decode(std::string_view frame);

 private:
  struct Strand;

  void deliver(const Envelope& e);

  FabricConfig config_;
  PortOf port_of_;
  const std::chrono::steady_clock::time_point start_;
  std::atomic<std::uint64_t> ids_{0};
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::mutex cancel_mu_;
  std::set<std::uint64_t> cancelled_;  // timers cancelled before they fired
  std::map<std::string, std::shared_ptr<Strand>> strands_;  // guarded by state_mu_
};

}  // namespace hacluster
