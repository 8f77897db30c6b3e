#include "hacluster/status.hpp"

#include <ctime>

#include "hacluster/common.hpp"
#include "json.hpp"

namespace hacluster {

using nlohmann::json;

std::string StatusReport::to_json() const {
  json members_j = json::array();
  for (const auto& m : members)
    members_j.push_back({{"name", m.name},
                         {"id", m.id},
                         {"online", m.online},
                         {"local", m.local},
                         {"rgmanager", m.rgmanager}});
  json services_j = json::array();
  for (const auto& s : services)
    services_j.push_back(
        {{"name", s.name}, {"state", s.state}, {"owner", s.owner}, {"last_owner", s.last_owner}});
  json doc = {{"cluster", cluster_name},
              {"timestamp_ms", timestamp_ms},
              {"quorate", quorate},
              {"members", members_j},
              {"services", services_j}};
  return doc.dump();
}

StatusReport StatusReport::from_json(std::string_view text) {
  StatusReport r;
  try {
    auto doc = json::parse(text);
    r.cluster_name = doc.at("cluster").get<std::string>();
    r.timestamp_ms = doc.at("timestamp_ms").get<std::int64_t>();
    r.quorate = doc.at("quorate").get<bool>();
    for (const auto& m : doc.at("members"))
      r.members.push_back({m.at("name").get<std::string>(), m.at("id").get<int>(),
                           m.at("online").get<bool>(), m.at("local").get<bool>(),
                           m.at("rgmanager").get<bool>()});
    for (const auto& s : doc.at("services"))
      r.services.push_back({s.at("name").get<std::string>(), s.at("state").get<std::string>(),
                            s.at("owner").get<std::string>(),
                            s.at("last_owner").get<std::string>()});
  } catch (const json::exception& e) {
    throw Error(Errc::ProtocolError, e.what());
  }
  return r;
}

std::string format_timestamp(std::int64_t unix_ms) {
  std::time_t secs = static_cast<std::time_t>(unix_ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%a %b %e %H:%M:%S %Y", &tm);
  return buf;
}

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render(const StatusReport& r) {
  std::string out;
  out += "Cluster Status for " + r.cluster_name + " @ " + format_timestamp(r.timestamp_ms) + "\n";
  out += std::string("Member Status: ") + (r.quorate ? "Quorate" : "Inquorate") + "\n\n";
  out += " " + pad("Member Name", 40) + lpad("ID", 4) + "   Status\n";
  out += " " + pad("------ ----", 40) + lpad("----", 4) + "   ------\n";
  for (const auto& m : r.members) {
    std::string flags = m.online ? "Online" : "Offline";
    if (m.local) flags += ", Local";
    if (m.rgmanager) flags += ", rgmanager";
    out += " " + pad(m.name, 40) + lpad(std::to_string(m.id), 4) + "   " + flags + "\n";
  }
  out += "\n";
  out += " " + pad("Service Name", 30) + " " + pad("Owner (Last)", 30) + " State\n";
  out += " " + pad("------- ----", 30) + " " + pad("----- ------", 30) + " -----\n";
  for (const auto& s : r.services) {
    std::string owner = !s.owner.empty()        ? s.owner
                        : !s.last_owner.empty() ? "(" + s.last_owner + ")"
                                                : "(none)";
    out += " " + pad(s.name, 30) + " " + pad(owner, 30) + " " + s.state + "\n";
  }
  return out;
}

}  // namespace hacluster
