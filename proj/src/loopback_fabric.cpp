#include "hacluster/loopback_fabric.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <queue>
#include <set>
#include <thread>

namespace hacluster {

namespace {

bool write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w <= 0) return false;
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, char* data, std::size_t n) {
  while (n > 0) {
    ssize_t r = ::recv(fd, data, n, 0);
    if (r <= 0) return false;
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

int listen_on(int port, int& bound) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return -1;
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 128) != 0) {
    ::close(fd);
    return -1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound = ntohs(addr.sin_port);
  return fd;
}

}  // namespace

struct LoopbackFabric::Strand {
  struct Timer {
    std::chrono::steady_clock::time_point due;
    std::uint64_t seq;
    std::uint64_t id;
    Task task;
  };
  struct Later {
    bool operator()(const Timer& a, const Timer& b) const {
      return a.due != b.due ? a.due > b.due : a.seq > b.seq;
    }
  };

  std::string name;
  int listen_fd = -1;
  int port = 0;
  std::thread listener;
  std::thread worker;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Task> ready;
  std::priority_queue<Timer, std::vector<Timer>, Later> timers;
  std::uint64_t seq = 0;
  bool stop = false;

  void post(Task t) {
    {
      std::lock_guard lock(mu);
      if (stop) return;
      ready.push_back(std::move(t));
    }
    cv.notify_one();
  }

  void add_timer(std::chrono::steady_clock::time_point due, std::uint64_t id, Task t) {
    {
      std::lock_guard lock(mu);
      if (stop) return;
      timers.push(Timer{due, ++seq, id, std::move(t)});
    }
    cv.notify_one();
  }

  void run() {
    std::unique_lock lock(mu);
    while (!stop) {
      if (!ready.empty()) {
        Task t = std::move(ready.front());
        ready.pop_front();
        lock.unlock();
        t();
        lock.lock();
        continue;
      }
      if (!timers.empty()) {
        auto due = timers.top().due;
        if (due <= std::chrono::steady_clock::now()) {
          Timer t = timers.top();
          timers.pop();
          lock.unlock();
          t.task();
          lock.lock();
          continue;
        }
        cv.wait_until(lock, due);
      } else {
        cv.wait(lock);
      }
    }
  }
};

LoopbackFabric::LoopbackFabric(FabricConfig config, PortOf port_of)
    : config_(config),
      port_of_(std::move(port_of)),
      start_(std::chrono::steady_clock::now()),
      rng_(config.seed) {
  fence_ack_ = config.fence_ack;
}

LoopbackFabric::~LoopbackFabric() {
  std::vector<std::string> names;
  {
    std::lock_guard lock(state_mu_);
    for (const auto& [n, _] : strands_) names.push_back(n);
  }
  for (const auto& n : names) detach(n);
}

Millis LoopbackFabric::now() const {
  return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - start_);
}

int LoopbackFabric::port(const std::string& endpoint) const {
  std::lock_guard lock(state_mu_);
  auto it = strands_.find(endpoint);
  return it == strands_.end() ? 0 : it->second->port;
}

std::string LoopbackFabric::encode(const Envelope& e) {
  return e.from + "\n" + e.to + "\n" + std::to_string(e.id) + "\n" + std::to_string(e.reply_to) +
         "\n" + std::to_string(e.epoch) + "\n" + e.body;
}

std::optional<Envelope> LoopbackFabric::decode(std::string_view frame) {
  std::string fields[5];
  for (auto& f : fields) {
    auto nl = frame.find('\n');
    if (nl == std::string_view::npos) return std::nullopt;
    f = std::string(frame.substr(0, nl));
    frame.remove_prefix(nl + 1);
  }
  Envelope e;
  e.from = fields[0];
  e.to = fields[1];
  try {
    e.id = std::stoull(fields[2]);
    e.reply_to = std::stoull(fields[3]);
    e.epoch = std::stoull(fields[4]);
  } catch (const std::logic_error&) {
    return std::nullopt;
  }
  e.body = std::string(frame);
  return e;
}

void LoopbackFabric::attach(const std::string& endpoint, Handler handler, EndpointClass cls) {
  detach(endpoint);
  auto s = std::make_shared<Strand>();
  s->name = endpoint;
  s->listen_fd = listen_on(port_of_ ? port_of_(endpoint) : 0, s->port);
  if (s->listen_fd < 0) s->listen_fd = listen_on(0, s->port);
  if (s->listen_fd < 0) throw Error(Errc::IoError, "cannot listen for " + endpoint);
  {
    std::lock_guard lock(state_mu_);
    auto& st = endpoints_[endpoint];
    st.handler = std::move(handler);
    st.cls = cls;
    st.crashed = false;
    ++st.generation;
    strands_[endpoint] = s;
  }
  s->worker = std::thread([s] { s->run(); });
  s->listener = std::thread([this, s] {
    for (;;) {
      int c = ::accept4(s->listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
      if (c < 0) {
        std::lock_guard lock(s->mu);
        if (s->stop) return;
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return;
      }
      timeval tv{1, 0};
      ::setsockopt(c, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
      std::uint32_t len_be = 0;
      std::string frame;
      if (read_all(c, reinterpret_cast<char*>(&len_be), 4) && ntohl(len_be) <= (64u << 20)) {
        frame.resize(ntohl(len_be));
        if (!read_all(c, frame.data(), frame.size())) frame.clear();
      }
      ::close(c);
      if (auto e = decode(frame)) deliver(*e);
    }
  });
}

void LoopbackFabric::detach(const std::string& endpoint) {
  std::shared_ptr<Strand> s;
  {
    std::lock_guard lock(state_mu_);
    auto it = strands_.find(endpoint);
    if (it == strands_.end()) return;
    s = it->second;
    strands_.erase(it);
    auto ep = endpoints_.find(endpoint);
    if (ep != endpoints_.end()) {
      ep->second.handler = nullptr;
      ++ep->second.generation;
    }
  }
  {
    std::lock_guard lock(s->mu);
    s->stop = true;
  }
  s->cv.notify_all();
  ::shutdown(s->listen_fd, SHUT_RDWR);
  if (s->listener.joinable()) s->listener.join();
  ::close(s->listen_fd);
  if (s->worker.get_id() == std::this_thread::get_id()) s->worker.detach();
  else if (s->worker.joinable()) s->worker.join();
}

void LoopbackFabric::send(Envelope e) {
  if (e.id == 0) e.id = next_id();
  int port = 0;
  {
    std::lock_guard lock(state_mu_);
    auto from = endpoints_.find(e.from);
    if (from != endpoints_.end() && from->second.crashed) return;
    auto to = endpoints_.find(e.to);
    if (to != endpoints_.end() && filter_locked(e)) return;
    const bool infra =
        (from != endpoints_.end() && from->second.cls == EndpointClass::Infrastructure) ||
        (to != endpoints_.end() && to->second.cls == EndpointClass::Infrastructure);
    if (!infra && config_.drop_rate > 0) {
      std::lock_guard r(rng_mu_);
      if (std::uniform_real_distribution<double>(0, 1)(rng_) < config_.drop_rate) return;
    }
    auto s = strands_.find(e.to);
    if (s != strands_.end()) port = s->second->port;
  }
  if (port == 0 && port_of_) port = port_of_(e.to);
  if (port <= 0) return;

  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return;
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
    const std::string frame = encode(e);
    const std::uint32_t len_be = htonl(static_cast<std::uint32_t>(frame.size()));
    if (write_all(fd, reinterpret_cast<const char*>(&len_be), 4)) write_all(fd, frame.data(), frame.size());
    // Wait for the receiver to finish reading so frames to one peer stay ordered.
    char sink;
    timeval tv{1, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::shutdown(fd, SHUT_WR);
    (void)::recv(fd, &sink, 1, 0);
  }
  ::close(fd);
}

void LoopbackFabric::deliver(const Envelope& e) {
  std::shared_ptr<Strand> s;
  std::uint64_t generation = 0;
  {
    std::lock_guard lock(state_mu_);
    if (filter_locked(e)) return;
    auto it = strands_.find(e.to);
    if (it == strands_.end()) return;
    s = it->second;
    generation = endpoints_.at(e.to).generation;
  }
  s->post([this, e, generation] {
    Handler handler;
    {
      std::lock_guard lock(state_mu_);
      auto it = endpoints_.find(e.to);
      if (it == endpoints_.end() || it->second.generation != generation || it->second.crashed ||
          !it->second.handler)
        return;
      if (filter_locked(e)) return;
      handler = it->second.handler;
    }
    observe(e, now());
    handler(e);
  });
}

std::uint64_t LoopbackFabric::schedule(const std::string& endpoint, Millis delay, Task task) {
  const std::uint64_t id = next_id();
  std::shared_ptr<Strand> s;
  std::uint64_t generation = 0;
  {
    std::lock_guard lock(state_mu_);
    auto it = strands_.find(endpoint);
    if (it == strands_.end()) return id;
    s = it->second;
    generation = endpoints_.at(endpoint).generation;
  }
  s->add_timer(std::chrono::steady_clock::now() + std::max(delay, Millis(0)), id,
               [this, id, endpoint, generation, task = std::move(task)] {
                 {
                   std::lock_guard c(cancel_mu_);
                   if (cancelled_.erase(id)) return;
                 }
                 {
                   std::lock_guard lock(state_mu_);
                   auto it = endpoints_.find(endpoint);
                   if (it == endpoints_.end() || it->second.crashed ||
                       it->second.generation != generation || !it->second.handler)
                     return;
                 }
                 task();
               });
  return id;
}

void LoopbackFabric::cancel(std::uint64_t timer) {
  std::lock_guard lock(cancel_mu_);
  cancelled_.insert(timer);
}

}  // namespace hacluster
