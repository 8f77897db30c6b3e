#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hacluster/common.hpp"

namespace hacluster {

struct VirtualAddress {
  std::string vip;
  std::optional<std::string> current_owner;
  std::uint64_t epoch = 0;
};

struct Resolution {
  std::string owner;
  std::uint64_t epoch = 0;

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Epoch-stamped VIP ownership registry (the ARP-takeover stand-in).
///
/// Updates are totally ordered under one lock; a bind must carry an epoch
/// strictly above every epoch the vip has seen.
class VipRegistry {
 public:
  struct BindRecord {
    std::string vip;
    std::string owner;
    std::uint64_t epoch;
  };

  /// Throws StaleEpoch when epoch <= current epoch.
  VirtualAddress bind(const std::string& vip, const std::string& node, std::uint64_t epoch);
  /// Clears the binding only if (node, epoch) is the current one.
  bool unbind(const std::string& vip, const std::string& node, std::uint64_t epoch);
  /// Throws Unbound for unknown or currently unowned vips.
  Resolution resolve(const std::string& vip) const;
  std::uint64_t epoch(const std::string& vip) const;

  std::vector<BindRecord> history() const;

  /// `BIND <vip> <node> <epoch>` -> `OK` | `ERR StaleEpoch <current>`;
  /// `UNBIND <vip> <node> <epoch>` -> `OK`;
  /// `RESOLVE <vip>` -> `OWNER <node> <epoch>` | `UNBOUND <last epoch>`.
  std::string handle(std::string_view line);

 private:
  mutable std::mutex mu_;
  std::map<std::string, VirtualAddress> table_;
  std::vector<BindRecord> history_;
};

namespace vip_wire {
std::string bind(std::string_view vip, std::string_view node, std::uint64_t epoch);
std::string unbind(std::string_view vip, std::string_view node, std::uint64_t epoch);
std::string resolve(std::string_view vip);
/// Parses an `OWNER <node> <epoch>` reply; nullopt for `UNBOUND` or garbage.
std::optional<Resolution> parse_owner(std::string_view reply);
/// Epoch carried by either `OWNER` or `UNBOUND` replies.
std::optional<std::uint64_t> parse_epoch(std::string_view reply);
/// Parses `ERR StaleEpoch <n>`.
std::optional<std::uint64_t> parse_stale_epoch(std::string_view reply);
}  // namespace vip_wire

/// Client re-resolution backoff: 50 ms doubling to an 800 ms cap.
class ResolveBackoff {
 public:
  Millis next() {
    Millis d = current_;
    current_ = std::min(current_ * 2, kCap);
    return d;
  }
  void reset() { current_ = kInitial; }

  static constexpr Millis kInitial{50};
  static constexpr Millis kCap{800};

 private:
  Millis current_ = kInitial;
};

}  // namespace hacluster
