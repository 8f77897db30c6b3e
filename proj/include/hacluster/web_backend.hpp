#pragma once

#include <functional>
#include <optional>
#include <string>

#include "hacluster/actor.hpp"
#include "hacluster/config.hpp"
#include "hacluster/http.hpp"
#include "hacluster/shared_store.hpp"

namespace hacluster {

inline constexpr std::string_view kWebServerId = "hacluster-web/1.0";

/// Maps a request path to the file served for it ("/" -> "/index.html").
/// nullopt for paths that can never exist on the export.
std::optional<std::string> document_path(std::string_view request_path);

/// Web server node: serves files read through its mount of the shared store.
class WebBackend final : public Actor {
 public:
  struct Options {
    std::string vip;
    std::string export_path = "/nfs";
    // Three-tier: the dedicated store node. Empty: the store behind the vip.
    std::string store_node;
    Millis store_timeout{300};
    Millis registry_timeout{500};
  };

  WebBackend(Fabric& fabric, const std::string& id, Options options);
  ~WebBackend() override;

  void boot();
  /// Application failure: the HTTP daemon dies until the node restarts.
  void kill() { alive_ = false; }
  bool alive() const { return alive_; }
  std::string hostname() const { return name() + ".example.com"; }
  const std::optional<MountBinding>& binding() const { return binding_; }

 protected:
  void on_message(const Envelope& e) override;

 private:
  using ReadDone = std::function<void(std::optional<std::string> bytes, int status)>;

  void serve(const Envelope& e, http::Request req);
  void read(const std::string& path, bool retried, ReadDone done);
  void mount(std::function<void(bool)> done);
  void send_store(std::string body, std::function<void(std::optional<StoreReply>)> done);
  http::Response respond(int status, std::string body) const;

  Options options_;
  bool alive_ = true;
  std::optional<MountBinding> binding_;
  std::string store_target_;
  std::uint64_t store_stamp_ = 0;
};

}  // namespace hacluster
