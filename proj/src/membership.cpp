#include "hacluster/membership.hpp"

#include <charconv>
#include <set>

namespace hacluster {

namespace {

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

int ClusterConfig::expected_votes() const {
  int total = 0;
  for (const auto& m : members) total += m.votes;
  return total;
}

const MemberConfig* ClusterConfig::find(std::string_view name) const {
  for (const auto& m : members)
    if (m.id.name == name) return &m;
  return nullptr;
}

void ClusterConfig::validate() const {
  if (name.empty()) throw Error(Errc::InvalidConfig, "empty cluster name");
  if (members.empty()) throw Error(Errc::InvalidConfig, "no members");
  std::set<std::string> names;
  std::set<int> ordinals;
  for (const auto& m : members) {
    if (m.id.name.empty()) throw Error(Errc::InvalidConfig, "empty member name");
    if (m.id.ordinal < 1) throw Error(Errc::InvalidConfig, "ordinal must be >= 1: " + m.id.name);
    if (m.votes < 1) throw Error(Errc::InvalidConfig, "votes must be >= 1: " + m.id.name);
    if (!names.insert(m.id.name).second)
      throw Error(Errc::InvalidConfig, "duplicate member name " + m.id.name);
    if (!ordinals.insert(m.id.ordinal).second)
      throw Error(Errc::DuplicateOrdinal, std::to_string(m.id.ordinal));
  }
  if (heartbeat_interval.count() <= 0 || failure_window.count() <= 0)
    throw Error(Errc::InvalidConfig, "timings must be positive");
}

QuorumState quorum(std::span<const Member> members, const ClusterConfig& config) {
  QuorumState q;
  q.expected_votes = config.expected_votes();
  q.two_node_mode = config.two_node_mode();
  for (const auto& m : members)
    if (m.online()) q.online_votes += m.votes;
  if (q.two_node_mode)
    q.quorate = q.online_votes >= 1;
  else
    q.quorate = 2 * q.online_votes > q.expected_votes;
  return q;
}

std::string Heartbeat::encode() const {
  return "HB " + cluster + " " + from.name + " " + std::to_string(from.ordinal) + " " +
         std::to_string(incarnation) + " " + std::to_string(owner_term) + "\n";
}

std::optional<Heartbeat> Heartbeat::parse(std::string_view line) {
  auto words = split_words(line);
  if (words.size() != 6 || words[0] != "HB") return std::nullopt;
  auto ordinal = parse_number<int>(words[3]);
  auto inc = parse_number<std::uint64_t>(words[4]);
  auto term = parse_number<std::uint64_t>(words[5]);
  if (!ordinal || !inc || !term) return std::nullopt;
  Heartbeat hb;
  hb.cluster = words[1];
  hb.from = NodeId{words[2], *ordinal};
  hb.incarnation = *inc;
  hb.owner_term = *term;
  return hb;
}

const Member* MembershipSnapshot::find(std::string_view name) const {
  for (const auto& m : members)
    if (m.id.name == name) return &m;
  return nullptr;
}

const Member& MembershipSnapshot::local() const {
  for (const auto& m : members)
    if (m.is_local) return m;
  throw Error(Errc::UnknownSelf);
}

Membership::Membership(ClusterConfig config, std::string_view self,
                       std::uint64_t previous_incarnation, Millis now)
    : config_(std::move(config)) {
  config_.validate();
  const MemberConfig* mine = config_.find(self);
  if (!mine) throw Error(Errc::UnknownSelf, std::string(self));
  self_ = mine->id;
  for (const auto& mc : config_.members) {
    Member m;
    m.id = mc.id;
    m.votes = mc.votes;
    if (mc.id.name == self_.name) {
      m.is_local = true;
      m.status = MemberStatus::Online;
      m.incarnation = previous_incarnation + 1;
      m.last_heartbeat = now;
      m.ever_seen = true;
    }
    members_.push_back(m);
  }
  down_incarnation_.assign(members_.size(), 0);
  refresh_gates_locked();
}

Member* Membership::find_locked(std::string_view name) {
  for (auto& m : members_)
    if (m.id.name == name) return &m;
  return nullptr;
}

void Membership::refresh_gates_locked() {
  if (seen_all_) return;
  for (const auto& m : members_)
    if (!m.online()) return;
  seen_all_ = true;
}

MembershipDelta Membership::on_heartbeat(const Heartbeat& hb, Millis now) {
  std::lock_guard lock(mu_);
  Member* m = find_locked(hb.from.name);
  if (!m || m->id.ordinal != hb.from.ordinal) throw Error(Errc::UnknownMember, hb.from.name);
  if (m->is_local) return MembershipDelta::none();

  const auto index = static_cast<std::size_t>(m - members_.data());
  if (hb.incarnation < m->incarnation) return MembershipDelta::none();

  if (m->online()) {
    const bool restarted = hb.incarnation > m->incarnation;
    m->incarnation = hb.incarnation;
    m->last_heartbeat = now;
    m->owner_term = hb.owner_term;
    if (restarted) return {MembershipDelta::Kind::MemberUp, m->id.name};
    return MembershipDelta::none();
  }

  // A member that was declared down must come back with a new incarnation.
  if (m->ever_seen && hb.incarnation <= down_incarnation_[index]) return MembershipDelta::none();

  m->status = MemberStatus::Online;
  m->incarnation = hb.incarnation;
  m->last_heartbeat = now;
  m->owner_term = hb.owner_term;
  m->ever_seen = true;
  refresh_gates_locked();
  return {MembershipDelta::Kind::MemberUp, m->id.name};
}

MembershipDelta Membership::accept(std::string_view line, Millis now) {
  auto hb = Heartbeat::parse(line);
  if (!hb || hb->cluster != config_.name) {
    std::lock_guard lock(mu_);
    ++dropped_;
    return MembershipDelta::none();
  }
  try {
    return on_heartbeat(*hb, now);
  } catch (const Error&) {
    std::lock_guard lock(mu_);
    ++dropped_;
    return MembershipDelta::none();
  }
}

std::vector<MembershipDelta> Membership::tick(Millis now) {
  std::lock_guard lock(mu_);
  std::vector<MembershipDelta> out;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    auto& m = members_[i];
    if (m.is_local || !m.online()) continue;
    if (now - m.last_heartbeat >= config_.failure_window) {
      m.status = MemberStatus::Offline;
      m.owner_term = 0;
      down_incarnation_[i] = m.incarnation;
      out.push_back({MembershipDelta::Kind::MemberDown, m.id.name});
    }
  }
  return out;
}

Heartbeat Membership::make_heartbeat(std::uint64_t owner_term) const {
  return Heartbeat{config_.name, self_, incarnation(), owner_term};
}

MembershipSnapshot Membership::snapshot() const {
  std::lock_guard lock(mu_);
  MembershipSnapshot s;
  s.cluster_name = config_.name;
  s.members = members_;
  s.quorum = quorum(members_, config_);
  s.wait_for_all_pending = config_.two_node_mode() && config_.wait_for_all && !seen_all_;
  return s;
}

std::uint64_t Membership::incarnation() const {
  std::lock_guard lock(mu_);
  for (const auto& m : members_)
    if (m.is_local) return m.incarnation;
  return 0;
}

std::uint64_t Membership::dropped_messages() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

}  // namespace hacluster
