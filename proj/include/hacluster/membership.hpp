#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hacluster/common.hpp"

namespace hacluster {

struct MemberConfig {
  NodeId id;
  int votes = 1;
  std::string address;  // host:port, used by the loopback fabric only
};

struct ClusterConfig {
  std::string name = "HAPROXYCL";
  std::vector<MemberConfig> members;
  Millis heartbeat_interval{500};
  Millis failure_window{1500};
  // Unset means "exactly two configured members".
  std::optional<bool> two_node;
  bool wait_for_all = true;

  bool two_node_mode() const { return two_node.value_or(members.size() == 2); }
  int expected_votes() const;
  const MemberConfig* find(std::string_view name) const;

  /// Throws InvalidConfig / DuplicateOrdinal on malformed member lists.
  void validate() const;
};

enum class MemberStatus { Online, Offline };

struct Member {
  NodeId id;
  MemberStatus status = MemberStatus::Offline;
  std::uint64_t incarnation = 0;
  int votes = 1;
  bool is_local = false;
  Millis last_heartbeat{0};
  // Term at which this member last reported owning the service group (0: not owner).
  std::uint64_t owner_term = 0;
  bool ever_seen = false;

  bool online() const { return status == MemberStatus::Online; }
};

struct QuorumState {
  bool quorate = false;
  int online_votes = 0;
  int expected_votes = 0;
  bool two_node_mode = false;

  friend bool operator==(const QuorumState&, const QuorumState&) = default;
};

/// Pure quorum computation over a member list.
QuorumState quorum(std::span<const Member> members, const ClusterConfig& config);

struct MembershipDelta {
  enum class Kind { None, MemberUp, MemberDown };
  Kind kind = Kind::None;
  std::string node;

  static MembershipDelta none() { return {}; }
  friend bool operator==(const MembershipDelta&, const MembershipDelta&) = default;
};

/// `HB <cluster_name> <node_name> <ordinal> <incarnation> <owner_term>\n`
struct Heartbeat {
  std::string cluster;
  NodeId from;
  std::uint64_t incarnation = 0;
  std::uint64_t owner_term = 0;

  std::string encode() const;
  static std::optional<Heartbeat> parse(std::string_view line);
};

struct MembershipSnapshot {
  std::string cluster_name;
  std::vector<Member> members;
  QuorumState quorum;
  // Two-node mode only: set until every member has been seen online once since start.
  bool wait_for_all_pending = false;

  bool effective_quorate() const { return quorum.quorate && !wait_for_all_pending; }
  const Member* find(std::string_view name) const;
  const Member& local() const;
};

/// Heartbeat-driven failure detector and quorum tracker for one node.
///
/// Mutations (on_heartbeat, accept, tick) must be serialized by the caller's
/// event queue; snapshot() may be called from any thread.
class Membership {
 public:
  /// Starts the local member. The new incarnation is previous_incarnation + 1.
  Membership(ClusterConfig config, std::string_view self, std::uint64_t previous_incarnation,
             Millis now);

  MembershipDelta on_heartbeat(const Heartbeat& hb, Millis now);

  /// Parses a wire line; foreign cluster names and garbage are dropped and counted.
  MembershipDelta accept(std::string_view line, Millis now);

  std::vector<MembershipDelta> tick(Millis now);

  Heartbeat make_heartbeat(std::uint64_t owner_term) const;

  MembershipSnapshot snapshot() const;

  const ClusterConfig& config() const { return config_; }
  const NodeId& self() const { return self_; }
  std::uint64_t incarnation() const;
  std::uint64_t dropped_messages() const;

 private:
  Member* find_locked(std::string_view name);
  void refresh_gates_locked();

  ClusterConfig config_;
  NodeId self_;
  mutable std::mutex mu_;
  std::vector<Member> members_;
  // Incarnation at which each member was last declared Offline (0: never).
  std::vector<std::uint64_t> down_incarnation_;
  bool seen_all_ = false;
  std::uint64_t dropped_ = 0;
};

}  // namespace hacluster
