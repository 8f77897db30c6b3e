#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hacluster {

using Millis = std::chrono::milliseconds;

enum class Errc {
  UnknownSelf,
  DuplicateOrdinal,
  UnknownMember,
  InvalidConfig,
  NotQuorate,
  ResourceStartFailed,
  TargetOffline,
  StartFailedOnTarget,
  FenceUnavailable,
  NoHealthyBackend,
  UpstreamError,
  VolumeBusy,
  VolumeMissing,
  VolumeDetached,
  AccessDenied,
  NoSuchExport,
  StaleBinding,
  NotFound,
  ReadOnlyExport,
  StaleEpoch,
  Unbound,
  UnknownNode,
  ScriptParseError,
  ProtocolError,
  IoError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + (what.empty() ? "" : ": " + what)),
        code_(code) {}
  explicit Error(Errc code) : Error(code, "") {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// A cluster member identity: the Member Name and ID columns of the status table.
struct NodeId {
  std::string name;
  int ordinal = 0;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

// Small string helpers shared by the line protocols.
std::vector<std::string> split_words(std::string_view line);
std::string_view trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool iequals(std::string_view a, std::string_view b);

/// 64-bit FNV-1a, used for trace digests.
class Fnv1a {
 public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t v);

}  // namespace hacluster
