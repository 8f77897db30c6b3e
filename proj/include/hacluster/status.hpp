#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hacluster {

struct MemberRow {
  std::string name;
  int id = 0;
  bool online = false;
  bool local = false;
  bool rgmanager = false;

  friend bool operator==(const MemberRow&, const MemberRow&) = default;
};

struct ServiceRow {
  std::string name;   // "service:HAPC"
  std::string state;  // started, starting, stopping, stopped, failed, recovering
  std::string owner;  // empty when nobody runs it
  std::string last_owner;

  friend bool operator==(const ServiceRow&, const ServiceRow&) = default;
};

/// One node's view of the cluster, as printed by `hacluster status`.
struct StatusReport {
  std::string cluster_name;
  std::int64_t timestamp_ms = 0;  // unix time
  bool quorate = false;
  std::vector<MemberRow> members;
  std::vector<ServiceRow> services;

  std::string to_json() const;
  /// Throws ProtocolError on malformed input.
  static StatusReport from_json(std::string_view text);

  friend bool operator==(const StatusReport&, const StatusReport&) = default;
};

/// clustat-style text; byte-identical for equal reports.
std::string render(const StatusReport& report);

/// `Thu Oct 16 10:00:05 2026` in UTC.
std::string format_timestamp(std::int64_t unix_ms);

}  // namespace hacluster
