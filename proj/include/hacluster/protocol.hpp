#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hacluster/http.hpp"

// Message bodies exchanged between actors, one verb per first word.
namespace hacluster::wire {

// HTTP carried over the fabric: "HTTP\n<raw request>"; replies are the raw response.
std::string http_request(const http::Request& req);
std::optional<http::Request> parse_http_request(std::string_view body);
inline bool is_http(std::string_view body) { return body.starts_with("HTTP\n"); }

// Reply from a node that does not (or no longer) answer on the virtual address.
inline constexpr std::string_view kRefused = "REFUSED";

// FENCE <victim> <victim_incarnation> <epoch> <requester_incarnation>
struct FenceRequest {
  std::string victim;
  std::uint64_t victim_incarnation = 0;
  std::uint64_t epoch = 0;
  std::uint64_t requester_incarnation = 0;

  std::string encode() const;
  static std::optional<FenceRequest> parse(std::string_view body);
};

// FENCED <epoch> <incarnation>: sent by the fence device to its victim.
std::string fenced(std::uint64_t epoch, std::uint64_t incarnation);

// TAKEOVER <term>: the sender stopped the group and asks the receiver to run it.
std::string takeover(std::uint64_t term);

// RELOCATE <target>
std::string relocate(std::string_view target);

inline constexpr std::string_view kStatus = "STATUS";

// Extends BIND with the binder's incarnation so a fenced node cannot rebind.
std::string bind(std::string_view vip, std::string_view node, std::uint64_t epoch,
                 std::uint64_t incarnation);

}  // namespace hacluster::wire
