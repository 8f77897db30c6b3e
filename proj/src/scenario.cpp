#include "hacluster/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hacluster/loopback_fabric.hpp"
#include "hacluster/protocol.hpp"
#include "hacluster/topology.hpp"

namespace hacluster {

namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw Error(Errc::ScriptParseError, "line " + std::to_string(line) + ": " + what);
}

template <typename T>
T number(const std::string& text, int line) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size())
    parse_error(line, "not a number: " + text);
  return v;
}

double real_number(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) parse_error(line, "not a number: " + text);
    return v;
  } catch (const std::logic_error&) {
    parse_error(line, "not a number: " + text);
  }
}

const std::set<std::string> kProbes = {"load", "bench", "write", "check-content", "relocate",
                                       "status"};

void check_probe(const std::vector<std::string>& a, int line) {
  if (a.empty() || !kProbes.contains(a[0])) parse_error(line, "unknown probe");
  const auto& v = a[0];
  if (v == "load" && (a.size() < 2 || a.size() > 3)) parse_error(line, "load <rate> [<stop-ms>]");
  if (v == "bench" && (a.size() < 2 || a.size() > 3 || (a.size() == 3 && a[2] != "cookie")))
    parse_error(line, "bench <n> [cookie]");
  if (v == "write" && a.size() < 3) parse_error(line, "write <path> <text>");
  if (v == "relocate" && a.size() != 2) parse_error(line, "relocate <target>");
  if (v == "status" && a.size() > 2) parse_error(line, "status [<node>]");
  if (v == "load") number<int>(a[1], line);
  if (v == "bench") number<int>(a[1], line);
  if (v == "check-content" && a.size() > 1) number<int>(a[1], line);
}

}  // namespace

Fault parse_fault(const std::vector<std::string>& a) {
  auto need = [&](std::size_t n) {
    if (a.size() != n) throw Error(Errc::ScriptParseError, "bad arguments for " + a[0]);
  };
  if (a.empty()) throw Error(Errc::ScriptParseError, "missing fault");
  const auto& v = a[0];
  if (v == "crash") return need(2), fault::Crash{a[1]};
  if (v == "restart") return need(2), fault::Restart{a[1]};
  if (v == "heal") return need(1), fault::Heal{};
  if (v == "kill") return need(3), fault::KillProcess{a[1], a[2]};
  if (v == "fence-off") return need(1), fault::FenceAck{false};
  if (v == "fence-on") return need(1), fault::FenceAck{true};
  if (v == "detach-volume" || v == "reattach-volume") {
    if (a.size() > 2) throw Error(Errc::ScriptParseError, "bad arguments for " + v);
    std::optional<std::string> node;
    if (a.size() == 2) node = a[1];
    if (v == "detach-volume") return fault::DetachVolume{node};
    return fault::ReattachVolume{node};
  }
  if (v == "partition") {
    fault::PartitionGroups p;
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (a[i] == "|") continue;
      std::set<std::string> group;
      std::stringstream ss(a[i]);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) group.insert(item);
      p.groups.push_back(std::move(group));
    }
    if (p.groups.size() < 2) throw Error(Errc::ScriptParseError, "partition needs two groups");
    return p;
  }
  throw Error(Errc::ScriptParseError, "unknown fault " + v);
}

Scenario Scenario::parse(std::string_view text, std::string name) {
  Scenario s;
  s.name = std::move(name);
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    auto w = split_words(raw.substr(0, hash));
    if (w.empty()) continue;
    const std::string& k = w[0];
    auto one = [&] {
      if (w.size() != 2) parse_error(line, k + " takes one argument");
      return w[1];
    };
    if (k == "NAME") {
      s.name = one();
    } else if (k == "TOPOLOGY") {
      auto v = one();
      if (v == "two_tier") s.topology = TopologyKind::TwoTier;
      else if (v == "three_tier") s.topology = TopologyKind::ThreeTier;
      else parse_error(line, "topology must be two_tier or three_tier");
    } else if (k == "BACKENDS") {
      s.backends = number<int>(one(), line);
      if (*s.backends < 1 || *s.backends > 16) parse_error(line, "BACKENDS must be 1..16");
    } else if (k == "MEMBERS") {
      s.members = number<int>(one(), line);
      if (*s.members < 1 || *s.members > 16) parse_error(line, "MEMBERS must be 1..16");
    } else if (k == "SEED") {
      s.seed = number<std::uint64_t>(one(), line);
    } else if (k == "LATENCY") {
      s.latency = Millis(number<long long>(one(), line));
    } else if (k == "DROP") {
      s.drop_rate = real_number(one(), line);
      if (*s.drop_rate < 0 || *s.drop_rate > 1) parse_error(line, "DROP must be within [0,1]");
    } else if (k == "DURATION") {
      s.duration = Millis(number<long long>(one(), line));
    } else if (k == "CONFIG") {
      s.config = one();
    } else if (k == "AT") {
      if (w.size() < 4) parse_error(line, "AT <ms> INJECT|PROBE ...");
      ScriptStep step;
      step.line = line;
      auto plus = w[1].find('+');
      step.at = Millis(number<long long>(w[1].substr(0, plus), line));
      if (plus != std::string::npos) step.jitter = Millis(number<long long>(w[1].substr(plus + 1), line));
      if (w[2] == "INJECT") step.kind = ScriptStep::Kind::Inject;
      else if (w[2] == "PROBE") step.kind = ScriptStep::Kind::Probe;
      else parse_error(line, "expected INJECT or PROBE");
      step.args.assign(w.begin() + 3, w.end());
      if (step.kind == ScriptStep::Kind::Inject) {
        try {
          parse_fault(step.args);
        } catch (const Error& e) {
          parse_error(line, e.what());
        }
      } else {
        check_probe(step.args, line);
      }
      s.steps.push_back(std::move(step));
    } else if (k == "EXPECT") {
      if (w.size() < 4) parse_error(line, "EXPECT <metric> <op> <value>");
      static const std::set<std::string> ops = {"==", "!=", "<=", ">=", "<", ">"};
      if (!ops.contains(w[2])) parse_error(line, "bad operator " + w[2]);
      std::string value = w[3];
      for (std::size_t i = 4; i < w.size(); ++i) value += " " + w[i];
      s.expectations.push_back({w[1], w[2], value, line});
    } else {
      parse_error(line, "unknown directive " + k);
    }
  }
  std::stable_sort(s.steps.begin(), s.steps.end(),
                   [](const ScriptStep& a, const ScriptStep& b) { return a.at < b.at; });
  return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto s = parse(ss.str(), path.stem().string());
  if (s.config && s.config->is_relative()) s.config = path.parent_path() / *s.config;
  return s;
}

// ---------------------------------------------------------------------------
// Report

bool ScenarioReport::passed() const {
  if (!violations.empty()) return false;
  return std::all_of(results.begin(), results.end(),
                     [](const ExpectationResult& r) { return r.passed; });
}

std::optional<double> ScenarioReport::number(const std::string& metric) const {
  auto it = metrics.find(metric);
  if (it == metrics.end()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::logic_error&) {
  }
  return std::nullopt;
}

std::string ScenarioReport::render() const {
  std::ostringstream out;
  out << "scenario " << name << "\n";
  for (const auto& l : log) out << "  " << l << "\n";
  out << "metrics:\n";
  for (const auto& [k, v] : metrics) out << "  " << k << " = " << v << "\n";
  if (violations.empty()) {
    out << "safety: ok\n";
  } else {
    out << "safety: " << violations.size() << " violation(s)\n";
    for (std::size_t i = 0; i < violations.size() && i < 20; ++i)
      out << "  " << violations[i] << "\n";
  }
  for (const auto& r : results)
    out << (r.passed ? "PASS" : "FAIL") << " expect " << r.expectation.metric << " "
        << r.expectation.op << " " << r.expectation.value << " (actual " << r.actual << ")\n";
  out << "digest " << hex64(digest) << "\n";
  out << "result " << (passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Runner

namespace {

class Driver final : public Actor {
 public:
  explicit Driver(Fabric& fabric) : Actor(fabric, "driver", EndpointClass::Infrastructure) {
    attach();
  }
  ~Driver() override { detach(); }
  void at(Millis delay, std::function<void()> fn) { after(delay, std::move(fn)); }
  void ask(const std::string& to, std::string body, Millis timeout, ReplyFn done) {
    call(to, std::move(body), timeout, std::move(done));
  }

 protected:
  void on_message(const Envelope&) override {}
};

bool compare(const std::string& actual, const std::string& op, const std::string& expected) {
  auto num = [](const std::string& s) -> std::optional<double> {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    return std::nullopt;
  };
  auto a = num(actual), e = num(expected);
  if (a && e) {
    if (op == "==") return *a == *e;
    if (op == "!=") return *a != *e;
    if (op == "<=") return *a <= *e;
    if (op == ">=") return *a >= *e;
    if (op == "<") return *a < *e;
    if (op == ">") return *a > *e;
  }
  if (op == "==") return actual == expected;
  if (op == "!=") return actual != expected;
  return false;
}

std::string fmt_ms(Millis t) {
  std::string s = std::to_string(t.count());
  if (s.size() < 7) s.insert(0, 7 - s.size(), ' ');
  return "[" + s + "]";
}

// Client actors must only be touched from their own strand.
void on_strand(Fabric& fabric, const std::string& endpoint, std::function<void()> fn) {
  fabric.schedule(endpoint, Millis(0), std::move(fn));
}

struct LoadSample {
  Outcome outcome;
  bool content_ok = true;
};

struct RunState {
  std::mutex mu;
  std::vector<std::string> log;
  std::map<std::string, std::string> metrics;
  std::vector<LoadSample> load;
  std::vector<Outcome> bench_outcomes;
  std::map<std::string, std::string> written;
  std::optional<Millis> fault_at;
  std::uint64_t fault_epoch = 0;
  int bench_count = 0;

  void note(Millis at, const std::string& what) {
    std::lock_guard lock(mu);
    log.push_back(fmt_ms(at) + " " + what);
  }
  void set(const std::string& k, const std::string& v) {
    std::lock_guard lock(mu);
    metrics[k] = v;
  }
};

void bench_metrics(RunState& st, const std::string& prefix, const BenchResult& r,
                   const Deployment& dep) {
  st.set(prefix + ".total", std::to_string(r.total));
  st.set(prefix + ".errors", std::to_string(r.errors));
  std::string seq;
  for (const auto& id : r.serverid_sequence) seq += (seq.empty() ? "" : ",") + id;
  st.set(prefix + ".sequence", seq);
  std::set<std::string> distinct(r.serverid_sequence.begin(), r.serverid_sequence.end());
  st.set(prefix + ".distinct", std::to_string(distinct.size()));
  bool alternating = !r.serverid_sequence.empty();
  for (std::size_t i = 1; i < r.serverid_sequence.size(); ++i)
    if (r.serverid_sequence[i] == r.serverid_sequence[i - 1]) alternating = false;
  st.set(prefix + ".alternating", alternating ? "1" : "0");
  // Cyclic: consecutive ids follow the configured pool order.
  bool cyclic = !r.serverid_sequence.empty();
  std::vector<std::string> pool;
  for (const auto& b : dep.backends) pool.push_back(b.id);
  auto index_of = [&](const std::string& id) {
    return static_cast<long>(std::find(pool.begin(), pool.end(), id) - pool.begin());
  };
  for (std::size_t i = 1; i < r.serverid_sequence.size(); ++i)
    if ((index_of(r.serverid_sequence[i - 1]) + 1) % static_cast<long>(pool.size()) !=
        index_of(r.serverid_sequence[i]))
      cyclic = false;
  st.set(prefix + ".cyclic", cyclic ? "1" : "0");
  if (!r.serverid_sequence.empty()) st.set(prefix + ".first", r.serverid_sequence.front());
  bool all_200 = r.total > 0 && std::all_of(r.statuses.begin(), r.statuses.end(),
                                            [](int s) { return s == 200; });
  st.set(prefix + ".all_200", all_200 ? "1" : "0");
  bool one_cookie = std::all_of(r.set_cookie_counts.begin(), r.set_cookie_counts.end(),
                                [](std::size_t n) { return n == 1; });
  st.set(prefix + ".one_cookie", one_cookie ? "1" : "0");
  std::uint64_t lo = UINT64_MAX, hi = 0;
  for (const auto& b : dep.backends) {
    auto it = r.per_backend.find(b.id);
    std::uint64_t n = it == r.per_backend.end() ? 0 : it->second;
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  st.set(prefix + ".spread", std::to_string(hi - lo));
}

Deployment assemble(const Scenario& s, const Deployment& base, const RunOptions& opt) {
  Deployment d = s.config ? Deployment::load(*s.config) : base;
  if (s.members && static_cast<int>(d.cluster.members.size()) != *s.members) {
    d.cluster.members.clear();
    for (int i = 1; i <= *s.members; ++i)
      d.cluster.members.push_back(MemberConfig{NodeId{member_name(i), i}, 1, ""});
  }
  if (s.backends && static_cast<int>(d.backends.size()) != *s.backends) {
    d.backends.clear();
    for (int i = 1; i <= *s.backends; ++i) d.backends.push_back({backend_name(i), ""});
  }
  if (s.topology) d.topology = *s.topology;
  if (s.latency) d.fabric.base_latency = *s.latency;
  if (s.drop_rate) d.fabric.drop_rate = *s.drop_rate;
  if (s.seed) d.fabric.seed = *s.seed;
  if (opt.seed) d.fabric.seed = *opt.seed;
  d.fabric.mode = opt.mode;
  if (opt.base_port) d.fabric.base_port = *opt.base_port;
  d.validate();
  return d;
}

}  // namespace

ScenarioReport run_scenario(const Scenario& scenario, const RunOptions& options) {
  return run_scenario(scenario, Deployment::standard(), options);
}

ScenarioReport run_scenario(const Scenario& scenario, const Deployment& base,
                            const RunOptions& options) {
  const Deployment dep = assemble(scenario, base, options);
  std::unique_ptr<Fabric> fabric;
  SimFabric* sim = nullptr;
  if (options.mode == FabricMode::Simulated) {
    auto f = std::make_unique<SimFabric>(dep.fabric);
    f->keep_trace(options.keep_trace);
    sim = f.get();
    fabric = std::move(f);
  } else {
    fabric = std::make_unique<LoopbackFabric>(
        dep.fabric, [&dep](const std::string& e) { return dep.port_for(e); });
  }

  Topology::Options topt;
  if (!sim) {
    const auto wall = std::chrono::duration_cast<Millis>(
        std::chrono::system_clock::now().time_since_epoch());
    topt.wall_base = wall.count() - fabric->now().count();
  }
  auto topo = std::make_unique<Topology>(dep, *fabric, topt);
  auto driver = std::make_unique<Driver>(*fabric);
  RunState st;
  std::mt19937_64 jitter_rng(dep.fabric.seed ^ 0x9e3779b97f4a7c15ULL);
  const Deployment& d = topo->deployment();

  st.set("topology", std::string(to_string(d.topology)));
  st.set("node_count", std::to_string(topo->node_count()));
  st.set("seed", std::to_string(d.fabric.seed));

  Topology* t = topo.get();
  Driver* drv = driver.get();
  Fabric* fab = fabric.get();
  const Millis t0 = fab->now();

  // Probes.
  auto run_probe = [&st, t, drv, fab, &d, t0, &scenario](const std::vector<std::string>& a) {
    const std::string& v = a[0];
    const Millis now = fab->now() - t0;
    if (v == "load") {
      const int rate = std::stoi(a[1]);
      const Millis stop = a.size() == 3 ? Millis(std::stoll(a[2]))
                                        : scenario.duration - d.timings.client_timeout;
      const Millis period(std::max(1, 1000 / std::max(rate, 1)));
      st.note(now, "probe load " + a[1] + "/s");
      auto tick = std::make_shared<std::function<void()>>();
      std::weak_ptr<std::function<void()>> weak = tick;
      *tick = [&st, t, drv, fab, stop, period, t0, weak] {
        if (fab->now() - t0 >= stop) return;
        on_strand(*fab, "loadgen", [&st, t] {
          t->client("loadgen").request(http::Request{}, [&st, t](Outcome o) {
            LoadSample s{o, true};
            if (o.ok()) s.content_ok = o.response->body == t->volume_file("/index.html");
            std::lock_guard lock(st.mu);
            st.load.push_back(std::move(s));
          });
        });
        drv->at(period, [self = weak.lock()] { (*self)(); });
      };
      (*tick)();
    } else if (v == "bench") {
      const int n = std::stoi(a[1]);
      const bool cookie = a.size() == 3;
      const int index = ++st.bench_count;
      st.note(now, "probe bench " + a[1] + (cookie ? " cookie" : ""));
      on_strand(*fab, "client1", [&st, t, &d, n, cookie, index, fab, t0] {
        t->client("client1").bench(n, cookie, [&st, &d, index, fab, t0](BenchResult r) {
          bench_metrics(st, "bench", r, d);
          bench_metrics(st, "bench" + std::to_string(index), r, d);
          st.note(fab->now() - t0, "bench " + std::to_string(index) + " done: " +
                                       std::to_string(r.total - r.errors) + "/" +
                                       std::to_string(r.total) + " ok");
        });
      });
    } else if (v == "write") {
      std::string text = a[2];
      for (std::size_t i = 3; i < a.size(); ++i) text += " " + a[i];
      text += "\n";
      const std::string path = a[1];
      st.note(now, "probe write " + path);
      on_strand(*fab, "admin", [&st, t, path, text] {
        t->client("admin").store_write(path, text, [&st, path, text](bool ok) {
          std::lock_guard lock(st.mu);
          if (ok) st.written[path] = text;
          auto& n = st.metrics["write.ok"];
          auto& f = st.metrics["write.failed"];
          if (n.empty()) n = "0";
          if (f.empty()) f = "0";
          (ok ? n : f) = std::to_string(std::stoi(ok ? n : f) + 1);
        });
      });
    } else if (v == "check-content") {
      const int want = a.size() > 1 ? std::stoi(a[1]) : 100;
      std::vector<std::string> paths;
      {
        std::lock_guard lock(st.mu);
        for (const auto& [p, _] : st.written) paths.push_back(p);
      }
      std::vector<std::string> pool;
      for (const auto& [p, _] : t->seeded_files()) pool.push_back(p);
      std::mt19937_64 rng(d.fabric.seed + 17);
      std::shuffle(pool.begin(), pool.end(), rng);
      for (int i = 0; i < want && i < static_cast<int>(pool.size()); ++i) paths.push_back(pool[i]);
      st.note(now, "probe check-content " + std::to_string(paths.size()) + " paths");
      auto pending = std::make_shared<int>(0);
      auto mismatches = std::make_shared<int>(0);
      auto failures = std::make_shared<int>(0);
      auto finish = [&st, pending, mismatches, failures, paths, d_backends = d.backends.size()] {
        if (--*pending > 0) return;
        st.set("content.checked", std::to_string(paths.size()));
        st.set("content.requests", std::to_string(paths.size() * (d_backends + 1)));
        st.set("content.mismatches", std::to_string(*mismatches));
        st.set("content.failures", std::to_string(*failures));
      };
      auto judged = std::make_shared<std::vector<std::function<void()>>>();
      for (const auto& p : paths) {
        const auto truth = t->volume_file(p);
        http::Request req;
        req.path = p;
        auto judge = [mismatches, failures, truth](std::optional<http::Response> r) {
          if (!r || r->status != 200) ++*failures;
          else if (!truth || r->body != *truth) ++*mismatches;
        };
        for (const auto& b : d.backends) {
          ++*pending;
          judged->push_back([t, &d, id = b.id, req, judge, finish] {
            t->client("checker").ask(id, wire::http_request(req), d.timings.client_timeout,
                                     [judge, finish](std::optional<std::string> raw) {
                                       std::optional<http::Response> r;
                                       if (raw && *raw != wire::kRefused)
                                         r = http::parse_response(*raw);
                                       judge(r);
                                       finish();
                                     });
          });
        }
        ++*pending;
        on_strand(*fab, "client-check", [t, req, judge, finish] {
          t->client("client-check").request(req, [judge, finish](Outcome o) {
            judge(o.response);
            finish();
          });
        });
      }
      on_strand(*fab, "checker", [judged] {
        for (auto& fn : *judged) fn();
      });
    } else if (v == "relocate") {
      const std::string target = a[1];
      st.note(now, "probe relocate " + target);
      auto owner = t->owner();
      if (!owner) {
        st.set("relocate.exit", "1");
        st.set("relocate.reason", "Unbound");
        return;
      }
      drv->ask(owner->owner, wire::relocate(target), d.timings.takeover_timeout,
               [&st, t, drv, target, &d, fab, t0](std::optional<Envelope> r) {
                 if (!r || r->body != "OK") {
                   st.set("relocate.exit", "1");
                   st.set("relocate.reason", r ? r->body.substr(4) : "timeout");
                   st.note(fab->now() - t0, "relocate failed: " + (r ? r->body : "timeout"));
                   return;
                 }
                 // Wait for the target to report the group started.
                 auto deadline = fab->now() + d.timings.takeover_timeout;
                 auto poll = std::make_shared<std::function<void()>>();
                 // Weak self-reference: the closure must not own itself.
                 std::weak_ptr<std::function<void()>> weak = poll;
                 *poll = [&st, drv, target, deadline, fab, weak, t0] {
                   auto self = weak.lock();
                   drv->ask(target, std::string(wire::kStatus), Millis(500),
                            [&st, drv, target, deadline, fab, self, t0](std::optional<Envelope> r) {
                              bool started = false;
                              if (r) {
                                auto rep = StatusReport::from_json(r->body);
                                started = !rep.services.empty() &&
                                          rep.services.front().owner == target &&
                                          rep.services.front().state == "started";
                              }
                              if (started) {
                                st.set("relocate.exit", "0");
                                st.note(fab->now() - t0, "relocate done: owner " + target);
                              } else if (fab->now() >= deadline) {
                                st.set("relocate.exit", "1");
                                st.set("relocate.reason", "StartFailedOnTarget");
                              } else if (self) {
                                drv->at(Millis(50), *self);
                              }
                            });
                 };
                 (*poll)();
               });
    } else if (v == "status") {
      std::vector<std::string> nodes;
      if (a.size() == 2) nodes.push_back(a[1]);
      else
        for (const auto& m : d.cluster.members) nodes.push_back(m.id.name);
      for (const auto& node : nodes) {
        drv->ask(node, std::string(wire::kStatus), Millis(1000),
                 [&st, node, fab, t0](std::optional<Envelope> r) {
                   if (!r) {
                     st.set("status." + node + ".reachable", "0");
                     return;
                   }
                   auto rep = StatusReport::from_json(r->body);
                   st.set("status." + node + ".reachable", "1");
                   st.set("status." + node + ".quorate", rep.quorate ? "1" : "0");
                   int online = 0;
                   for (const auto& m : rep.members) online += m.online;
                   st.set("status." + node + ".online", std::to_string(online));
                   const auto& s = rep.services.front();
                   st.set("status." + node + ".owner", s.owner.empty() ? "none" : s.owner);
                   st.set("status." + node + ".state", s.state);
                   std::string text = render(rep);
                   st.note(fab->now() - t0, "status from " + node + ":\n" + text);
                 });
      }
    }
  };

  // Faults.
  auto run_inject = [&st, t, fab, t0](const std::vector<std::string>& a) {
    const Millis now = fab->now() - t0;
    const Fault f = parse_fault(a);
    const bool disruptive = std::holds_alternative<fault::Crash>(f) ||
                            std::holds_alternative<fault::KillProcess>(f) ||
                            std::holds_alternative<fault::DetachVolume>(f) ||
                            std::holds_alternative<fault::PartitionGroups>(f);
    {
      std::lock_guard lock(st.mu);
      if (disruptive && !st.fault_at) {
        st.fault_at = fab->now();
        auto o = t->owner();
        st.fault_epoch = t->registry().registry().epoch(t->deployment().service.vip);
        (void)o;
      }
    }
    st.note(now, "inject " + describe(f));
    try {
      fab->inject(f);
    } catch (const Error& e) {
      st.note(now, std::string("inject failed: ") + e.what());
      st.set("inject.errors", "1");
    }
  };

  for (const char* c : {"loadgen", "client1", "admin", "checker", "client-check"}) topo->client(c);
  topo->boot();
  for (const auto& step : scenario.steps) {
    Millis at = step.at;
    if (step.jitter.count() > 0)
      at += Millis(std::uniform_int_distribution<long long>(0, step.jitter.count() - 1)(jitter_rng));
    auto args = step.args;
    if (step.kind == ScriptStep::Kind::Inject)
      driver->at(at, [run_inject, args] { run_inject(args); });
    else
      driver->at(at, [run_probe, args] { run_probe(args); });
  }

  if (sim) {
    sim->run_until(t0 + scenario.duration);
  } else {
    std::this_thread::sleep_for(scenario.duration);
  }

  // Collect.
  ScenarioReport report;
  report.name = scenario.name;
  {
    auto o = topo->owner();
    st.set("owner", o ? o->owner : "none");
    st.set("epoch", std::to_string(topo->registry().registry().epoch(d.service.vip)));
    st.set("fence_events", std::to_string(fab->fences().events().size()));
    st.set("lifecycle.ordered", topo->lifecycle().ordered(
                                    d.topology == TopologyKind::TwoTier
                                        ? std::vector<ResourceKind>{ResourceKind::VirtualEndpoint,
                                                                    ResourceKind::SharedStore,
                                                                    ResourceKind::Balancer}
                                        : std::vector<ResourceKind>{ResourceKind::VirtualEndpoint,
                                                                    ResourceKind::Balancer})
                                    ? "1"
                                    : "0");
    auto safety = topo->safety();
    report.violations = safety.violations;
    st.set("safety.violations", std::to_string(safety.violations.size()));
    st.set("client_responses", std::to_string(topo->deliveries().size()));
  }
  {
    std::lock_guard lock(st.mu);
    std::optional<Millis> failover;
    if (st.fault_at) {
      auto consider = [&](const Outcome& o) {
        if (!o.ok() || o.epoch <= st.fault_epoch || o.received < *st.fault_at) return;
        const Millis dt = o.received - *st.fault_at;
        if (!failover || dt < *failover) failover = dt;
      };
      for (const auto& s : st.load) consider(s.outcome);
      st.metrics["fault_ms"] = std::to_string((*st.fault_at - t0).count());
    }
    if (failover) st.metrics["failover_ms"] = std::to_string(failover->count());
    if (!st.load.empty()) {
      std::uint64_t ok = 0, errors = 0, bad = 0, late_errors = 0;
      for (const auto& s : st.load) {
        if (s.outcome.ok()) ++ok;
        else ++errors;
        if (s.outcome.ok() && !s.content_ok) ++bad;
        if (failover && !s.outcome.ok() && s.outcome.sent >= *st.fault_at + *failover)
          ++late_errors;
      }
      st.metrics["load.total"] = std::to_string(st.load.size());
      st.metrics["load.ok"] = std::to_string(ok);
      st.metrics["load.errors"] = std::to_string(errors);
      st.metrics["load.bad_content"] = std::to_string(bad);
      if (failover) st.metrics["load.errors_after_recovery"] = std::to_string(late_errors);
    }
    report.metrics = st.metrics;
    report.log = st.log;
  }
  if (sim) report.digest = sim->digest();
  report.metrics["digest"] = hex64(report.digest);

  driver.reset();
  topo.reset();
  fabric.reset();

  for (const auto& e : scenario.expectations) {
    ExpectationResult r;
    r.expectation = e;
    auto it = report.metrics.find(e.metric);
    if (it == report.metrics.end()) {
      r.actual = "<missing>";
      r.passed = false;
    } else {
      r.actual = it->second;
      r.passed = compare(it->second, e.op, e.value);
    }
    report.results.push_back(std::move(r));
  }
  return report;
}

}  // namespace hacluster
