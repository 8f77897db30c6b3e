#include "hacluster/protocol.hpp"

#include <charconv>

#include "hacluster/common.hpp"

namespace hacluster::wire {

namespace {
bool to_u64(const std::string& s, std::uint64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}
}  // namespace

std::string http_request(const http::Request& req) { return "HTTP\n" + http::serialize(req); }

std::optional<http::Request> parse_http_request(std::string_view body) {
  if (!is_http(body)) return std::nullopt;
  return http::parse_request(body.substr(5));
}

std::string FenceRequest::encode() const {
  return "FENCE " + victim + " " + std::to_string(victim_incarnation) + " " +
         std::to_string(epoch) + " " + std::to_string(requester_incarnation);
}

std::optional<FenceRequest> FenceRequest::parse(std::string_view body) {
  auto w = split_words(body);
  if (w.size() != 5 || w[0] != "FENCE") return std::nullopt;
  FenceRequest r;
  r.victim = w[1];
  if (!to_u64(w[2], r.victim_incarnation) || !to_u64(w[3], r.epoch) ||
      !to_u64(w[4], r.requester_incarnation))
    return std::nullopt;
  return r;
}

std::string fenced(std::uint64_t epoch, std::uint64_t incarnation) {
  return "FENCED " + std::to_string(epoch) + " " + std::to_string(incarnation);
}
std::string takeover(std::uint64_t term) { return "TAKEOVER " + std::to_string(term); }
std::string relocate(std::string_view target) { return "RELOCATE " + std::string(target); }

std::string bind(std::string_view vip, std::string_view node, std::uint64_t epoch,
                 std::uint64_t incarnation) {
  return "BIND " + std::string(vip) + " " + std::string(node) + " " + std::to_string(epoch) +
         " " + std::to_string(incarnation);
}

}  // namespace hacluster::wire
