#include "hacluster/shared_store.hpp"

#include <fnmatch.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace hacluster {

namespace fs = std::filesystem;

void ExportEntry::validate() const {
  if (!is_normalized_absolute(export_path))
    throw Error(Errc::InvalidConfig, "export path must be absolute and normalized: " + export_path);
  if (client_pattern.empty()) throw Error(Errc::InvalidConfig, "empty client pattern");
}

bool hostname_matches(std::string_view pattern, std::string_view hostname) {
  return ::fnmatch(std::string(pattern).c_str(), std::string(hostname).c_str(), FNM_CASEFOLD) == 0;
}

bool is_normalized_absolute(std::string_view path) {
  if (path.empty() || path.front() != '/') return false;
  if (path == "/") return true;
  if (path.back() == '/') return false;
  std::string_view rest = path.substr(1);
  while (true) {
    auto slash = rest.find('/');
    std::string_view seg = rest.substr(0, slash);
    if (seg.empty() || seg == "." || seg == "..") return false;
    if (slash == std::string_view::npos) return true;
    rest = rest.substr(slash + 1);
  }
}

// ---------------------------------------------------------------------------
// Storage backends

namespace {

class MemoryStorage final : public VolumeStorage {
 public:
  std::optional<std::string> get(const std::string& key) const override {
    auto it = data_.find(key);
    if (it == data_.end()) return std::nullopt;
    return it->second;
  }
  void put(const std::string& key, const std::string& bytes) override { data_[key] = bytes; }
  std::map<std::string, std::string> all() const override { return data_; }
  Meta load_meta() const override { return meta_; }
  void save_meta(const Meta& meta) override { meta_ = meta; }

 private:
  std::map<std::string, std::string> data_;
  Meta meta_;
};

class DirectoryStorage final : public VolumeStorage {
 public:
  explicit DirectoryStorage(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "data");
  }

  std::optional<std::string> get(const std::string& key) const override {
    std::ifstream in(file_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void put(const std::string& key, const std::string& bytes) override {
    fs::path target = file_for(key);
    fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(Errc::IoError, tmp.string());
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    fs::rename(tmp, target);
  }

  std::map<std::string, std::string> all() const override {
    std::map<std::string, std::string> out;
    const fs::path data = root_ / "data";
    for (const auto& entry : fs::recursive_directory_iterator(data)) {
      if (!entry.is_regular_file() || entry.path().extension() == ".tmp") continue;
      std::string key = "/" + fs::relative(entry.path(), data).generic_string();
      out[key] = *get(key);
    }
    return out;
  }

  Meta load_meta() const override {
    Meta meta;
    std::ifstream in(root_ / ".meta");
    if (!in) return meta;
    std::string node;
    int released = 1;
    in >> node >> meta.holder.epoch >> released >> meta.generation;
    meta.holder.node = node == "-" ? "" : node;
    meta.holder.released = released != 0;
    return meta;
  }

  void save_meta(const Meta& meta) override {
    fs::path tmp = root_ / ".meta.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << (meta.holder.node.empty() ? "-" : meta.holder.node) << ' ' << meta.holder.epoch << ' '
          << (meta.holder.released ? 1 : 0) << ' ' << meta.generation << '\n';
    }
    fs::rename(tmp, root_ / ".meta");
  }

 private:
  fs::path file_for(const std::string& key) const {
    return root_ / "data" / fs::path(key).relative_path();
  }

  fs::path root_;
};

}  // namespace

std::unique_ptr<VolumeStorage> make_memory_storage() { return std::make_unique<MemoryStorage>(); }

std::unique_ptr<VolumeStorage> make_directory_storage(fs::path root) {
  return std::make_unique<DirectoryStorage>(std::move(root));
}

// ---------------------------------------------------------------------------
// Volume

Volume::Volume(std::string id, std::unique_ptr<VolumeStorage> storage)
    : id_(std::move(id)), storage_(std::move(storage)) {}

void Volume::attach(const std::string& node, std::uint64_t epoch, std::uint64_t fenced_through) {
  std::lock_guard lock(mu_);
  if (failed_paths_.contains(node)) throw Error(Errc::VolumeDetached, node);
  auto meta = storage_->load_meta();
  auto& h = meta.holder;
  if (!h.node.empty()) {
    const bool same = h.node == node && h.epoch == epoch;
    if (!same && epoch <= h.epoch)
      throw Error(Errc::VolumeBusy, "epoch " + std::to_string(epoch) + " <= holder epoch " +
                                        std::to_string(h.epoch));
    if (!same && !h.released && h.node != node && fenced_through < h.epoch)
      throw Error(Errc::VolumeBusy, "previous holder " + h.node + " not fenced");
  }
  h = VolumeHolder{node, epoch, false};
  storage_->save_meta(meta);
}

void Volume::release(const std::string& node, std::uint64_t epoch) {
  std::lock_guard lock(mu_);
  if (failed_paths_.contains(node)) throw Error(Errc::VolumeDetached, node);
  auto meta = storage_->load_meta();
  if (meta.holder.node == node && meta.holder.epoch == epoch) {
    meta.holder.released = true;
    storage_->save_meta(meta);
  }
}

void Volume::check_access_locked(const std::string& node, std::uint64_t epoch) const {
  if (failed_paths_.contains(node)) throw Error(Errc::VolumeDetached, node);
  auto h = storage_->load_meta().holder;
  if (h.node != node || h.epoch != epoch || h.released)
    throw Error(Errc::VolumeBusy, node + " does not hold " + id_ + " at epoch " +
                                      std::to_string(epoch));
}

std::optional<std::string> Volume::read(const std::string& node, std::uint64_t epoch,
                                        const std::string& key) const {
  std::lock_guard lock(mu_);
  check_access_locked(node, epoch);
  return storage_->get(key);
}

std::uint64_t Volume::write(const std::string& node, std::uint64_t epoch, const std::string& key,
                            const std::string& bytes) {
  std::lock_guard lock(mu_);
  check_access_locked(node, epoch);
  storage_->put(key, bytes);
  auto meta = storage_->load_meta();
  ++meta.generation;
  storage_->save_meta(meta);
  return meta.generation;
}

std::uint64_t Volume::seed(const std::string& key, const std::string& bytes) {
  std::lock_guard lock(mu_);
  storage_->put(key, bytes);
  auto meta = storage_->load_meta();
  ++meta.generation;
  storage_->save_meta(meta);
  return meta.generation;
}

std::uint64_t Volume::generation() const {
  std::lock_guard lock(mu_);
  return storage_->load_meta().generation;
}

std::map<std::string, std::string> Volume::contents() const {
  std::lock_guard lock(mu_);
  return storage_->all();
}

VolumeHolder Volume::holder() const {
  std::lock_guard lock(mu_);
  return storage_->load_meta().holder;
}

void Volume::set_path_failed(const std::string& node, bool failed) {
  std::lock_guard lock(mu_);
  if (failed) failed_paths_.insert(node);
  else failed_paths_.erase(node);
}

bool Volume::path_ok(const std::string& node) const {
  std::lock_guard lock(mu_);
  return !failed_paths_.contains(node);
}

std::shared_ptr<Volume> San::add(std::string id, std::unique_ptr<VolumeStorage> storage) {
  std::lock_guard lock(mu_);
  auto vol = std::make_shared<Volume>(id, std::move(storage));
  volumes_[id] = vol;
  return vol;
}

std::shared_ptr<Volume> San::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = volumes_.find(id);
  if (it == volumes_.end()) throw Error(Errc::VolumeMissing, id);
  return it->second;
}

bool San::contains(const std::string& id) const {
  std::lock_guard lock(mu_);
  return volumes_.contains(id);
}

// ---------------------------------------------------------------------------
// Tokens and replies

std::string MountToken::encode() const {
  return client + "|" + export_path + "|" + std::to_string(epoch);
}

std::optional<MountToken> MountToken::parse(std::string_view text) {
  auto p1 = text.find('|');
  if (p1 == std::string_view::npos) return std::nullopt;
  auto p2 = text.find('|', p1 + 1);
  if (p2 == std::string_view::npos) return std::nullopt;
  MountToken t;
  t.client = std::string(text.substr(0, p1));
  t.export_path = std::string(text.substr(p1 + 1, p2 - p1 - 1));
  auto num = text.substr(p2 + 1);
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), t.epoch);
  if (ec != std::errc{} || ptr != num.data() + num.size() || t.client.empty()) return std::nullopt;
  return t;
}

StoreReply StoreReply::parse(std::string_view raw) {
  StoreReply r;
  if (raw.starts_with("OK")) {
    r.ok = true;
    raw.remove_prefix(2);
    if (!raw.empty() && (raw.front() == ' ' || raw.front() == '\n')) raw.remove_prefix(1);
    r.payload = std::string(raw);
    return r;
  }
  if (raw.starts_with("ERR ")) {
    auto code = trim(raw.substr(4));
    for (int c = 0; c <= static_cast<int>(Errc::IoError); ++c) {
      if (to_string(static_cast<Errc>(c)) == code) {
        r.error = static_cast<Errc>(c);
        break;
      }
    }
    if (!r.error) r.error = Errc::ProtocolError;
    return r;
  }
  r.error = Errc::ProtocolError;
  return r;
}

namespace store_wire {
std::string mount(std::string_view hostname, std::string_view export_path) {
  return "MOUNT " + std::string(hostname) + " " + std::string(export_path);
}
std::string read(const MountToken& token, std::string_view path) {
  return "READ " + token.encode() + " " + std::string(path);
}
std::string write(const MountToken& token, std::string_view path, std::string_view bytes) {
  return "WRITE " + token.encode() + " " + std::string(path) + " " +
         std::to_string(bytes.size()) + "\n" + std::string(bytes);
}
std::string list() { return "LIST"; }
std::string ok(std::string_view payload) {
  return payload.empty() ? "OK" : "OK " + std::string(payload);
}
std::string err(Errc code) { return "ERR " + std::string(to_string(code)); }
}  // namespace store_wire

// ---------------------------------------------------------------------------
// StoreServer

StoreServer::StoreServer(std::string node, StoreConfig config, std::shared_ptr<San> san)
    : node_(std::move(node)), config_(std::move(config)), san_(std::move(san)) {
  for (const auto& e : config_.exports) e.validate();
}

void StoreServer::attach_volume(std::uint64_t epoch, std::uint64_t fenced_through) {
  auto vol = san_->get(config_.volume_id);
  vol->attach(node_, epoch, fenced_through);
  std::lock_guard lock(mu_);
  volume_ = std::move(vol);
  epoch_ = epoch;
  running_ = true;
}

void StoreServer::stop() {
  std::shared_ptr<Volume> vol;
  std::uint64_t epoch = 0;
  {
    std::lock_guard lock(mu_);
    vol = std::move(volume_);
    epoch = epoch_;
    running_ = false;
  }
  if (!vol) return;
  try {
    vol->release(node_, epoch);
  } catch (const Error&) {
    // Path to the volume is gone; the next owner must fence us instead.
  }
}

bool StoreServer::running() const {
  std::lock_guard lock(mu_);
  return running_;
}

std::uint64_t StoreServer::epoch() const {
  std::lock_guard lock(mu_);
  return epoch_;
}

bool StoreServer::healthy() const {
  std::lock_guard lock(mu_);
  return running_ && volume_ && volume_->path_ok(node_);
}

const ExportEntry* StoreServer::find_export(std::string_view path) const {
  for (const auto& e : config_.exports)
    if (e.export_path == path) return &e;
  return nullptr;
}

MountBinding StoreServer::mount(const std::string& hostname, const std::string& export_path) const {
  std::lock_guard lock(mu_);
  if (!running_) throw Error(Errc::StaleBinding, "store not running on " + node_);
  const ExportEntry* e = find_export(export_path);
  if (!e) throw Error(Errc::NoSuchExport, export_path);
  if (!hostname_matches(e->client_pattern, hostname)) throw Error(Errc::AccessDenied, hostname);
  return MountBinding{hostname, export_path, epoch_, BindingStatus::Attached};
}

std::string StoreServer::key_for(const MountToken& token, const std::string& path) const {
  std::string rel = path;
  while (!rel.empty() && rel.front() == '/') rel.erase(0, 1);
  if (rel.empty() || !is_normalized_absolute("/" + rel)) throw Error(Errc::NotFound, path);
  return token.export_path + "/" + rel;
}

std::shared_ptr<Volume> StoreServer::volume_checked(const MountToken& token) const {
  std::lock_guard lock(mu_);
  if (!running_ || token.epoch != epoch_) throw Error(Errc::StaleBinding);
  if (!find_export(token.export_path)) throw Error(Errc::NoSuchExport, token.export_path);
  return volume_;
}

std::string StoreServer::read(const MountToken& token, const std::string& path) const {
  auto vol = volume_checked(token);
  const std::string key = key_for(token, path);
  try {
    auto bytes = vol->read(node_, token.epoch, key);
    if (!bytes) throw Error(Errc::NotFound, path);
    return *bytes;
  } catch (const Error& e) {
    if (e.code() == Errc::VolumeBusy) throw Error(Errc::StaleBinding, e.what());
    throw;
  }
}

std::uint64_t StoreServer::write(const MountToken& token, const std::string& path,
                                 const std::string& bytes) {
  auto vol = volume_checked(token);
  const ExportEntry* e = find_export(token.export_path);
  if (e->mode == ExportMode::ReadOnly) throw Error(Errc::ReadOnlyExport, token.export_path);
  const std::string key = key_for(token, path);
  try {
    return vol->write(node_, token.epoch, key, bytes);
  } catch (const Error& err) {
    if (err.code() == Errc::VolumeBusy) throw Error(Errc::StaleBinding, err.what());
    throw;
  }
}

std::string StoreServer::export_report(std::string_view address) const {
  std::string out = "Export list for " + std::string(address) + ":\n";
  for (const auto& e : config_.exports) out += e.export_path + " " + e.client_pattern + "\n";
  return out;
}

std::string StoreServer::handle(std::string_view request, std::string_view address) {
  auto nl = request.find('\n');
  std::string_view head = request.substr(0, nl);
  auto words = split_words(head);
  if (words.empty()) return store_wire::err(Errc::ProtocolError);
  try {
    const std::string& verb = words[0];
    if (verb == "MOUNT" && words.size() == 3) {
      return store_wire::ok(mount(words[1], words[2]).token().encode());
    }
    if (verb == "READ" && words.size() == 3) {
      auto token = MountToken::parse(words[1]);
      if (!token) return store_wire::err(Errc::ProtocolError);
      std::string bytes = read(*token, words[2]);
      return "OK " + std::to_string(bytes.size()) + "\n" + bytes;
    }
    if (verb == "WRITE" && words.size() == 4 && nl != std::string_view::npos) {
      auto token = MountToken::parse(words[1]);
      std::size_t len = 0;
      auto [ptr, ec] = std::from_chars(words[3].data(), words[3].data() + words[3].size(), len);
      std::string_view body = request.substr(nl + 1);
      if (!token || ec != std::errc{} || body.size() != len)
        return store_wire::err(Errc::ProtocolError);
      return store_wire::ok(std::to_string(write(*token, words[2], std::string(body))));
    }
    if (verb == "LIST" && words.size() == 1) {
      if (!running()) return store_wire::err(Errc::StaleBinding);
      return "OK\n" + export_report(address);
    }
  } catch (const Error& e) {
    return store_wire::err(e.code());
  }
  return store_wire::err(Errc::ProtocolError);
}

}  // namespace hacluster
