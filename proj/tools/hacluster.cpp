// Operator CLI: status, relocate, bench, scenario, run-node, version.
//
// status/relocate/bench drive an in-process simulated cluster by default; with
// --real they talk to run-node processes over loopback TCP.

#include <atomic>
#include <chrono>
#include <csignal>
#include <future>
#include <iostream>
#include <memory>
#include <thread>

#include "CLI11.hpp"
#include "hacluster/loopback_fabric.hpp"
#include "hacluster/protocol.hpp"
#include "hacluster/scenario.hpp"
#include "hacluster/topology.hpp"

#ifndef HACLUSTER_VERSION
#define HACLUSTER_VERSION "0.0.0"
#endif

using namespace hacluster;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kEnvironment = 2;

class Ctl final : public Actor {
 public:
  Ctl(Fabric& fabric, std::string name) : Actor(fabric, std::move(name), EndpointClass::Infrastructure) {
    attach();
  }
  ~Ctl() override { detach(); }
  void ask(const std::string& to, std::string body, Millis timeout, ReplyFn done) {
    call(to, std::move(body), timeout, std::move(done));
  }
  void at(Millis delay, std::function<void()> fn) { after(delay, std::move(fn)); }

 protected:
  void on_message(const Envelope&) override {}
};

struct Common {
  std::string config;
  int backends = 0;
  std::string topology;
  std::uint64_t seed = 0;
  bool real = false;
  int base_port = 0;
  long long settle_ms = 3000;
  long long after_ms = 8000;
  std::vector<std::string> injects;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Deployment JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--backends", c.backends, "Backend count for the standard deployment")
      ->check(CLI::Range(1, 16));
  cmd->add_option("--topology", c.topology, "two_tier or three_tier")
      ->check(CLI::IsMember({"two_tier", "three_tier"}));
  cmd->add_option("--seed", c.seed, "Simulation seed");
  cmd->add_flag("--real", c.real, "Talk to run-node processes over loopback TCP");
  cmd->add_option("--base-port", c.base_port, "Loopback port base (with --real)");
  cmd->add_option("--settle", c.settle_ms, "Simulated ms to run before acting");
  cmd->add_option("--inject", c.injects, "Fault to apply after settling, e.g. \"crash hap01\"");
  cmd->add_option("--after", c.after_ms, "Simulated ms to run after the injected faults");
}

Deployment deployment_of(const Common& c) {
  Deployment d = c.config.empty() ? Deployment::standard(c.backends ? c.backends : 2)
                                  : Deployment::load(c.config);
  if (!c.config.empty() && c.backends && static_cast<int>(d.backends.size()) != c.backends) {
    d.backends.clear();
    for (int i = 1; i <= c.backends; ++i) d.backends.push_back({backend_name(i), ""});
  }
  if (c.topology == "two_tier") d.topology = TopologyKind::TwoTier;
  if (c.topology == "three_tier") d.topology = TopologyKind::ThreeTier;
  if (c.seed) d.fabric.seed = c.seed;
  if (c.base_port) d.fabric.base_port = c.base_port;
  d.validate();
  return d;
}

// Either an in-process simulated cluster or a handle on a real one.
class Session {
 public:
  explicit Session(const Common& c) : dep_(deployment_of(c)) {
    if (c.real) {
      dep_.fabric.mode = FabricMode::RealLoopback;
      fabric_ = std::make_unique<LoopbackFabric>(
          dep_.fabric, [this](const std::string& e) { return dep_.port_for(e); });
    } else {
      dep_.fabric.mode = FabricMode::Simulated;
      auto sim = std::make_unique<SimFabric>(dep_.fabric);
      sim_ = sim.get();
      fabric_ = std::move(sim);
      topology_ = std::make_unique<Topology>(dep_, *fabric_);
      topology_->boot();
      sim_->run_for(Millis(c.settle_ms));
      if (!c.injects.empty()) {
        for (const auto& f : c.injects) fabric_->inject(parse_fault(split_words(f)));
        sim_->run_for(Millis(c.after_ms));
      }
    }
    ctl_ = std::make_unique<Ctl>(*fabric_, "ctl");
    Client::Options opt;
    opt.vip = dep_.service.vip;
    opt.request_timeout = dep_.timings.client_timeout;
    opt.registry_timeout = dep_.timings.registry_timeout;
    opt.store_timeout = dep_.timings.store_timeout;
    client_ = std::make_unique<Client>(*fabric_, "client-cli", opt);
  }

  ~Session() {
    client_.reset();
    ctl_.reset();
    topology_.reset();
  }

  const Deployment& deployment() const { return dep_; }

  /// Runs `start` on `endpoint`'s strand and blocks until it calls back.
  template <typename T>
  T wait(const std::string& endpoint, std::function<void(std::function<void(T)>)> start,
         Millis limit) {
    auto result = std::make_shared<std::optional<T>>();
    auto promise = std::make_shared<std::promise<void>>();
    auto future = promise->get_future();
    fabric_->schedule(endpoint, Millis(0), [start, result, promise] {
      start([result, promise](T v) {
        if (*result) return;
        *result = std::move(v);
        promise->set_value();
      });
    });
    if (sim_) {
      const Millis deadline = sim_->now() + limit;
      while (!*result && sim_->now() < deadline) sim_->run_for(Millis(10));
    } else {
      future.wait_for(limit);
    }
    if (!*result) throw Error(Errc::IoError, "no answer within " + std::to_string(limit.count()) + " ms");
    return std::move(**result);
  }

  std::optional<std::string> ask(const std::string& to, std::string body, Millis timeout) {
    return wait<std::optional<std::string>>(
        "ctl",
        [this, to, body, timeout](std::function<void(std::optional<std::string>)> done) {
          ctl_->ask(to, body, timeout, [done](std::optional<Envelope> e) {
            done(e ? std::optional<std::string>(e->body) : std::nullopt);
          });
        },
        timeout + Millis(1000));
  }

  void pause(Millis span) {
    if (sim_) sim_->run_for(span);
    else std::this_thread::sleep_for(span);
  }

  Client& client() { return *client_; }

 private:
  Deployment dep_;
  std::unique_ptr<Fabric> fabric_;
  SimFabric* sim_ = nullptr;
  std::unique_ptr<Topology> topology_;
  std::unique_ptr<Ctl> ctl_;
  std::unique_ptr<Client> client_;
};

std::optional<StatusReport> query_status(Session& s, const std::string& node) {
  auto answer = s.ask(node, std::string(wire::kStatus), Millis(1000));
  if (!answer) return std::nullopt;
  return StatusReport::from_json(*answer);
}

int cmd_status(const Common& c, const std::string& node) {
  Session s(c);
  std::vector<std::string> order;
  if (!node.empty()) order.push_back(node);
  else
    for (const auto& m : s.deployment().cluster.members) order.push_back(m.id.name);
  for (const auto& n : order) {
    if (auto rep = query_status(s, n)) {
      std::cout << render(*rep);
      return kOk;
    }
  }
  std::cerr << "status: no cluster node reachable\n";
  return kEnvironment;
}

int cmd_relocate(const Common& c, const std::string& service, const std::string& target) {
  Session s(c);
  const auto& dep = s.deployment();
  if (service != dep.service.name) {
    std::cerr << "relocate: unknown service " << service << "\n";
    return kFailed;
  }
  auto resolved = s.ask(std::string(kRegistryEndpoint), "RESOLVE " + dep.service.vip,
                        dep.timings.registry_timeout);
  if (!resolved) {
    std::cerr << "relocate: registry unreachable\n";
    return kEnvironment;
  }
  auto words = split_words(*resolved);
  if (words.size() < 2 || words[0] != "OWNER") {
    std::cerr << "relocate: service not running\n";
    return kFailed;
  }
  auto reply = s.ask(words[1], wire::relocate(target), dep.timings.takeover_timeout);
  if (!reply) {
    std::cerr << "relocate: owner " << words[1] << " did not answer\n";
    return kFailed;
  }
  if (*reply != "OK") {
    std::cerr << "relocate: " << (reply->starts_with("ERR ") ? reply->substr(4) : *reply) << "\n";
    return kFailed;
  }
  for (Millis waited{0}; waited < dep.timings.takeover_timeout; waited += Millis(100)) {
    if (auto rep = query_status(s, target)) {
      const auto& row = rep->services.front();
      if (row.owner == target && row.state == "started") {
        std::cout << service << " started on " << target << "\n";
        return kOk;
      }
    }
    s.pause(Millis(100));
  }
  std::cerr << "relocate: StartFailedOnTarget\n";
  return kFailed;
}

int cmd_bench(const Common& c, int n, bool cookie) {
  Session s(c);
  auto limit = Millis((n + 1) * (s.deployment().timings.client_timeout.count() * 2 + 1000));
  auto result = s.wait<BenchResult>(
      "client-cli",
      [&s, n, cookie](std::function<void(BenchResult)> done) { s.client().bench(n, cookie, done); },
      limit);
  std::cout << result.to_text();
  return kOk;
}

int cmd_scenario(const std::vector<std::string>& files, const Common& c, bool trace) {
  int rc = kOk;
  for (const auto& f : files) {
    Scenario sc;
    try {
      sc = Scenario::load(f);
    } catch (const Error& e) {
      std::cerr << f << ": " << e.what() << "\n";
      return kEnvironment;
    }
    RunOptions opt;
    if (c.seed) opt.seed = c.seed;
    if (c.real) opt.mode = FabricMode::RealLoopback;
    if (c.base_port) opt.base_port = c.base_port;
    opt.keep_trace = trace;
    auto report = run_scenario(sc, opt);
    std::cout << report.render();
    if (!report.passed()) rc = kFailed;
  }
  return rc;
}

std::atomic<bool> g_stop{false};

int cmd_run_node(const std::string& config, const std::string& name) {
  Deployment dep = config.empty() ? Deployment::standard() : Deployment::load(config);
  dep.fabric.mode = FabricMode::RealLoopback;
  LoopbackFabric fabric(dep.fabric, [&dep](const std::string& e) { return dep.port_for(e); });

  auto san = std::make_shared<San>();
  auto storage = dep.store_directory.empty() ? make_memory_storage()
                                             : make_directory_storage(dep.store_directory);
  auto volume = san->add(dep.store.volume_id, std::move(storage));
  const std::string index = dep.store.exports.front().export_path + "/index.html";
  if (!volume->contents().contains(index))
    volume->seed(index, "<html><body><h1>" + dep.service.name + "</h1></body></html>\n");

  LifecycleLog lifecycle;
  OwnershipLog ownership;
  std::unique_ptr<Actor> actor;
  std::unique_ptr<ClusterNode> node;
  std::uint64_t incarnation = 0;
  std::atomic<bool> rebooting{false};

  auto start_member = [&] {
    ClusterNode::Env env;
    env.deployment = &dep;
    env.san = san;
    env.lifecycle = &lifecycle;
    env.ownership = &ownership;
    env.power_off = [&](const std::string&) { rebooting = true; };
    env.wall_clock = [] {
      return std::chrono::duration_cast<Millis>(std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
    node = std::make_unique<ClusterNode>(fabric, name, incarnation, std::move(env));
    incarnation = node->incarnation();
    node->boot();
  };

  if (dep.cluster.find(name)) {
    start_member();
  } else if (name == kRegistryEndpoint) {
    actor = std::make_unique<RegistryActor>(fabric);
  } else if (name == kFenceEndpoint) {
    actor = std::make_unique<FenceDevice>(
        fabric, dep.timings.fence_delay,
        [&dep](const std::string& n) {
          const auto* m = dep.cluster.find(n);
          return m ? m->id.ordinal : 0;
        },
        [] { return std::uint64_t{0}; });
  } else if (dep.topology == TopologyKind::ThreeTier && name == dep.store_node) {
    actor = std::make_unique<StoreNode>(fabric, name, dep.store, san);
  } else if (std::any_of(dep.backends.begin(), dep.backends.end(),
                         [&](const BackendConfig& b) { return b.id == name; })) {
    WebBackend::Options opt;
    opt.vip = dep.service.vip;
    opt.export_path = dep.store.exports.front().export_path;
    if (dep.topology == TopologyKind::ThreeTier) opt.store_node = dep.store_node;
    opt.store_timeout = dep.timings.store_timeout;
    opt.registry_timeout = dep.timings.registry_timeout;
    auto b = std::make_unique<WebBackend>(fabric, name, opt);
    b->boot();
    actor = std::move(b);
  } else {
    std::cerr << "run-node: " << name << " is not part of the deployment\n";
    return kEnvironment;
  }
  std::cerr << "run-node: " << name << " listening on 127.0.0.1:" << fabric.port(name) << "\n";

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) {
    std::this_thread::sleep_for(Millis(50));
    if (rebooting.exchange(false) && node) {
      std::cerr << "run-node: " << name << " fenced, rebooting\n";
      node.reset();
      std::this_thread::sleep_for(dep.timings.reboot_delay);
      start_member();
    }
  }
  node.reset();
  actor.reset();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier HA web cluster toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string node;
  auto* status = app.add_subcommand("status", "Print cluster membership and service ownership");
  add_common(status, common);
  status->add_option("--node", node, "Member to query");

  std::string service, target;
  auto* relocate = app.add_subcommand("relocate", "Move a service to another member");
  add_common(relocate, common);
  relocate->add_option("service", service)->required();
  relocate->add_option("target", target)->required();

  int n = 6;
  bool cookie = false;
  auto* bench = app.add_subcommand("bench", "Sequential HEAD requests through the virtual endpoint");
  add_common(bench, common);
  bench->add_option("-n,--requests", n, "Request count")->check(CLI::PositiveNumber);
  bench->add_flag("--cookie", cookie, "Replay the first SERVERID cookie");

  std::vector<std::string> files;
  bool trace = false;
  auto* scenario = app.add_subcommand("scenario", "Run scenario scripts");
  scenario->add_option("files", files)->required();
  scenario->add_option("--seed", common.seed, "Override the script seed");
  scenario->add_flag("--real", common.real, "Run over loopback TCP in real time");
  scenario->add_option("--base-port", common.base_port, "Loopback port base");
  scenario->add_flag("--trace", trace, "Keep the full delivery trace");

  std::string config, name;
  auto* run_node = app.add_subcommand("run-node", "Run one node of a deployment over loopback TCP");
  run_node->add_option("--config", config, "Deployment JSON file")->check(CLI::ExistingFile);
  run_node->add_option("name", name)->required();

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kEnvironment;
  }

  try {
    if (*version) {
      std::cout << "hacluster " << HACLUSTER_VERSION << "\n";
      return kOk;
    }
    if (*status) return cmd_status(common, node);
    if (*relocate) return cmd_relocate(common, service, target);
    if (*bench) return cmd_bench(common, n, cookie);
    if (*scenario) return cmd_scenario(files, common, trace);
    if (*run_node) return cmd_run_node(config, name);
  } catch (const Error& e) {
    std::cerr << "hacluster: " << e.what() << "\n";
    return kEnvironment;
  } catch (const std::exception& e) {
    std::cerr << "hacluster: " << e.what() << "\n";
    return kEnvironment;
  }
  return kEnvironment;
}
