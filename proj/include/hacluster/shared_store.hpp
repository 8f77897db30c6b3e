#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hacluster/common.hpp"

namespace hacluster {

enum class ExportMode { ReadOnly, ReadWrite };

struct ExportEntry {
  std::string export_path;     // absolute, normalized, e.g. "/nfs"
  std::string client_pattern;  // hostname glob, e.g. "*.example.com"
  ExportMode mode = ExportMode::ReadWrite;

  /// Throws InvalidConfig on a relative/unnormalized path or an empty pattern.
  void validate() const;
};

/// Hostname glob matching (`*`, `?`, `[...]`), case-insensitive like DNS names.
bool hostname_matches(std::string_view pattern, std::string_view hostname);

/// True for "/a/b" style paths without empty, "." or ".." segments.
bool is_normalized_absolute(std::string_view path);

/// Who currently holds a shared volume (a SCSI-reservation analog).
struct VolumeHolder {
  std::string node;
  std::uint64_t epoch = 0;
  bool released = true;
};

/// Backing storage for a volume: memory in simulation, a directory in real mode.
class VolumeStorage {
 public:
  struct Meta {
    VolumeHolder holder;
    std::uint64_t generation = 0;
  };

  virtual ~VolumeStorage() = default;
  virtual std::optional<std::string> get(const std::string& key) const = 0;
  virtual void put(const std::string& key, const std::string& bytes) = 0;
  virtual std::map<std::string, std::string> all() const = 0;
  virtual Meta load_meta() const = 0;
  virtual void save_meta(const Meta& meta) = 0;
};

std::unique_ptr<VolumeStorage> make_memory_storage();
std::unique_ptr<VolumeStorage> make_directory_storage(std::filesystem::path root);

/// A shared volume reachable by every balancer node (the SAN LUN).
///
/// Every access names (node, epoch); only the current holder at its epoch may
/// read or write, so a stale owner can never touch committed data.
class Volume {
 public:
  Volume(std::string id, std::unique_ptr<VolumeStorage> storage);

  const std::string& id() const { return id_; }

  /// Takes the volume for (node, epoch). The previous holder must have
  /// released it, or be covered by a confirmed fence (fenced_through >= its epoch).
  void attach(const std::string& node, std::uint64_t epoch, std::uint64_t fenced_through);
  void release(const std::string& node, std::uint64_t epoch);

  std::optional<std::string> read(const std::string& node, std::uint64_t epoch,
                                  const std::string& key) const;
  std::uint64_t write(const std::string& node, std::uint64_t epoch, const std::string& key,
                      const std::string& bytes);

  /// Direct seeding used by deployment tooling; bumps the generation.
  std::uint64_t seed(const std::string& key, const std::string& bytes);

  std::uint64_t generation() const;
  std::map<std::string, std::string> contents() const;
  VolumeHolder holder() const;

  // "Hard disk" fault: the node's path to the volume fails.
  void set_path_failed(const std::string& node, bool failed);
  bool path_ok(const std::string& node) const;

 private:
  void check_access_locked(const std::string& node, std::uint64_t epoch) const;

  std::string id_;
  mutable std::mutex mu_;
  std::unique_ptr<VolumeStorage> storage_;
  std::set<std::string> failed_paths_;
};

/// The set of shared volumes.
class San {
 public:
  std::shared_ptr<Volume> add(std::string id, std::unique_ptr<VolumeStorage> storage);
  /// Throws VolumeMissing.
  std::shared_ptr<Volume> get(const std::string& id) const;
  bool contains(const std::string& id) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Volume>> volumes_;
};

/// `<client>|<export>|<epoch>`
struct MountToken {
  std::string client;
  std::string export_path;
  std::uint64_t epoch = 0;

  std::string encode() const;
  static std::optional<MountToken> parse(std::string_view text);
};

enum class BindingStatus { Attached, Stale };

struct MountBinding {
  std::string client;
  std::string export_path;
  std::uint64_t server_epoch = 0;
  BindingStatus status = BindingStatus::Attached;

  MountToken token() const { return {client, export_path, server_epoch}; }
};

struct StoreConfig {
  std::string volume_id = "lun0";
  std::vector<ExportEntry> exports{{"/nfs", "*.example.com", ExportMode::ReadWrite}};
};

/// The shared-content service run by the group owner (or a dedicated store
/// node in the three-tier baseline).
class StoreServer {
 public:
  StoreServer(std::string node, StoreConfig config, std::shared_ptr<San> san);

  /// Opens the backing volume at `epoch`; throws VolumeBusy / VolumeMissing.
  void attach_volume(std::uint64_t epoch, std::uint64_t fenced_through);
  /// Releases the volume if still reachable; the server stops either way.
  void stop();

  bool running() const;
  std::uint64_t epoch() const;
  /// Health probe: running and the volume path is intact.
  bool healthy() const;

  MountBinding mount(const std::string& hostname, const std::string& export_path) const;
  std::string read(const MountToken& token, const std::string& path) const;
  std::uint64_t write(const MountToken& token, const std::string& path, const std::string& bytes);

  /// `Export list for <address>:` then one `<export_path> <client_pattern>` line per entry.
  std::string export_report(std::string_view address) const;

  /// Line protocol: MOUNT / READ / WRITE / LIST requests, `OK ...` / `ERR <code>` replies.
  std::string handle(std::string_view request, std::string_view address);

  const StoreConfig& config() const { return config_; }

 private:
  const ExportEntry* find_export(std::string_view path) const;
  std::string key_for(const MountToken& token, const std::string& path) const;
  std::shared_ptr<Volume> volume_checked(const MountToken& token) const;

  std::string node_;
  StoreConfig config_;
  std::shared_ptr<San> san_;
  mutable std::mutex mu_;
  std::shared_ptr<Volume> volume_;
  std::uint64_t epoch_ = 0;
  bool running_ = false;
};

/// Parsed store reply: `OK <payload>` or `ERR <code>`.
struct StoreReply {
  bool ok = false;
  std::optional<Errc> error;
  std::string payload;

  static StoreReply parse(std::string_view raw);
};

namespace store_wire {
std::string mount(std::string_view hostname, std::string_view export_path);
std::string read(const MountToken& token, std::string_view path);
std::string write(const MountToken& token, std::string_view path, std::string_view bytes);
std::string list();
std::string ok(std::string_view payload);
std::string err(Errc code);
}  // namespace store_wire

}  // namespace hacluster
