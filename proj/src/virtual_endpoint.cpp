#include "hacluster/virtual_endpoint.hpp"

#include <charconv>

namespace hacluster {

namespace {

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

VirtualAddress VipRegistry::bind(const std::string& vip, const std::string& node,
                                 std::uint64_t epoch) {
  std::lock_guard lock(mu_);
  auto& entry = table_[vip];
  entry.vip = vip;
  if (epoch <= entry.epoch)
    throw Error(Errc::StaleEpoch, std::to_string(entry.epoch));
  entry.current_owner = node;
  entry.epoch = epoch;
  history_.push_back({vip, node, epoch});
  return entry;
}

bool VipRegistry::unbind(const std::string& vip, const std::string& node, std::uint64_t epoch) {
  std::lock_guard lock(mu_);
  auto it = table_.find(vip);
  if (it == table_.end() || it->second.current_owner != node || it->second.epoch != epoch)
    return false;
  it->second.current_owner.reset();
  return true;
}

Resolution VipRegistry::resolve(const std::string& vip) const {
  std::lock_guard lock(mu_);
  auto it = table_.find(vip);
  if (it == table_.end() || !it->second.current_owner) throw Error(Errc::Unbound, vip);
  return {*it->second.current_owner, it->second.epoch};
}

std::uint64_t VipRegistry::epoch(const std::string& vip) const {
  std::lock_guard lock(mu_);
  auto it = table_.find(vip);
  return it == table_.end() ? 0 : it->second.epoch;
}

std::vector<VipRegistry::BindRecord> VipRegistry::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

std::string VipRegistry::handle(std::string_view line) {
  auto w = split_words(line);
  if (w.size() == 4 && (w[0] == "BIND" || w[0] == "UNBIND")) {
    auto epoch = parse_u64(w[3]);
    if (!epoch) return "ERR ProtocolError";
    if (w[0] == "UNBIND") {
      unbind(w[1], w[2], *epoch);
      return "OK";
    }
    try {
      bind(w[1], w[2], *epoch);
      return "OK";
    } catch (const Error& e) {
      return "ERR StaleEpoch " + std::to_string(this->epoch(w[1]));
    }
  }
  if (w.size() == 2 && w[0] == "RESOLVE") {
    try {
      auto r = resolve(w[1]);
      return "OWNER " + r.owner + " " + std::to_string(r.epoch);
    } catch (const Error&) {
      return "UNBOUND " + std::to_string(this->epoch(w[1]));
    }
  }
  return "ERR ProtocolError";
}

namespace vip_wire {

std::string bind(std::string_view vip, std::string_view node, std::uint64_t epoch) {
  return "BIND " + std::string(vip) + " " + std::string(node) + " " + std::to_string(epoch);
}

std::string unbind(std::string_view vip, std::string_view node, std::uint64_t epoch) {
  return "UNBIND " + std::string(vip) + " " + std::string(node) + " " + std::to_string(epoch);
}

std::string resolve(std::string_view vip) { return "RESOLVE " + std::string(vip); }

std::optional<Resolution> parse_owner(std::string_view reply) {
  auto w = split_words(reply);
  if (w.size() != 3 || w[0] != "OWNER") return std::nullopt;
  auto epoch = parse_u64(w[2]);
  if (!epoch) return std::nullopt;
  return Resolution{w[1], *epoch};
}

std::optional<std::uint64_t> parse_epoch(std::string_view reply) {
  auto w = split_words(reply);
  if (w.size() == 3 && w[0] == "OWNER") return parse_u64(w[2]);
  if (w.size() == 2 && w[0] == "UNBOUND") return parse_u64(w[1]);
  return std::nullopt;
}

std::optional<std::uint64_t> parse_stale_epoch(std::string_view reply) {
  auto w = split_words(reply);
  if (w.size() != 3 || w[0] != "ERR" || w[1] != "StaleEpoch") return std::nullopt;
  return parse_u64(w[2]);
}

}  // namespace vip_wire

}  // namespace hacluster
