#include "hacluster/common.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace hacluster {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnknownSelf: return "UnknownSelf";
    case Errc::DuplicateOrdinal: return "DuplicateOrdinal";
    case Errc::UnknownMember: return "UnknownMember";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NotQuorate: return "NotQuorate";
    case Errc::ResourceStartFailed: return "ResourceStartFailed";
    case Errc::TargetOffline: return "TargetOffline";
    case Errc::StartFailedOnTarget: return "StartFailedOnTarget";
    case Errc::FenceUnavailable: return "FenceUnavailable";
    case Errc::NoHealthyBackend: return "NoHealthyBackend";
    case Errc::UpstreamError: return "UpstreamError";
    case Errc::VolumeBusy: return "VolumeBusy";
    case Errc::VolumeMissing: return "VolumeMissing";
    case Errc::VolumeDetached: return "VolumeDetached";
    case Errc::AccessDenied: return "AccessDenied";
    case Errc::NoSuchExport: return "NoSuchExport";
    case Errc::StaleBinding: return "StaleBinding";
    case Errc::NotFound: return "NotFound";
    case Errc::ReadOnlyExport: return "ReadOnlyExport";
    case Errc::StaleEpoch: return "StaleEpoch";
    case Errc::Unbound: return "Unbound";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::ScriptParseError: return "ScriptParseError";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace hacluster
