// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hacluster/scenario.hpp"
#include "hacluster/topology.hpp"
#include "status_goldens.hpp"

using namespace hacluster;
using namespace std::chrono_literals;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& what) {
    if (!cond) ok = false;
    notes.push_back(std::string(cond ? "" : "!") + what);
  }
};

std::filesystem::path script(const std::string& stem) {
  return std::filesystem::path(HACLUSTER_SOURCE_DIR) / "scenarios" / (stem + ".scn");
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Timed {
  ScenarioReport report;
  double seconds = 0;
};

Timed timed_run(const Scenario& s, const RunOptions& o = {}) {
  auto t0 = Clock::now();
  Timed t{run_scenario(s, o), 0};
  t.seconds = seconds_since(t0);
  return t;
}

RunOptions real_mode(int base_port) {
  RunOptions o;
  o.mode = FabricMode::RealLoopback;
  o.base_port = base_port;
  return o;
}

std::string failing(const ScenarioReport& r) {
  std::string out;
  for (const auto& x : r.results)
    if (!x.passed)
      out += " [" + x.expectation.metric + " " + x.expectation.op + " " + x.expectation.value +
             " got " + x.actual + "]";
  for (const auto& v : r.violations) out += " [" + v + "]";
  return out;
}

// Failover deadline: four failure windows of the default deployment.
Millis deadline() { return 4 * Deployment::standard().cluster.failure_window; }

Verdict criterion1() {
  Verdict v;
  auto sim = timed_run(Scenario::load(script("round-robin")));
  v.check(sim.report.passed(), "sim pass" + failing(sim.report));
  v.check(sim.seconds < 1.0, "sim " + fmt(sim.seconds) + "s < 1s");
  v.check(sim.report.metrics["bench.sequence"] == "node01,node02,node01,node02,node01,node02",
          "sequence " + sim.report.metrics["bench.sequence"]);

  auto short_script = Scenario::parse(
      "TOPOLOGY two_tier\nBACKENDS 2\nSEED 3\nDURATION 2600\n"
      "AT 1500 PROBE bench 6\n"
      "EXPECT bench.total == 6\nEXPECT bench.errors == 0\nEXPECT bench.alternating == 1\n"
      "EXPECT bench.distinct == 2\nEXPECT bench.all_200 == 1\nEXPECT bench.one_cookie == 1\n",
      "round-robin-real");
  auto real = timed_run(short_script, real_mode(24100));
  v.check(real.report.passed(), "real pass" + failing(real.report));
  v.check(real.seconds < 5.0, "real " + fmt(real.seconds) + "s < 5s");
  return v;
}

void failover_checks(Verdict& v, const std::string& tag, const ScenarioReport& r) {
  v.check(r.passed(), tag + " pass" + failing(r));
  auto ms = r.number("failover_ms");
  v.check(ms && *ms <= static_cast<double>(deadline().count()),
          tag + " failover_ms=" + (ms ? fmt(*ms) : std::string("none")) + " <= " +
              std::to_string(deadline().count()));
  v.check(r.number("safety.violations") == 0.0, tag + " safety");
  v.check(r.number("load.errors_after_recovery") == 0.0 && r.number("load.bad_content") == 0.0,
          tag + " post-failover content");
}

Verdict criterion2() {
  Verdict v;
  auto s = Scenario::load(script("failover-node-crash"));
  auto sim = timed_run(s);
  failover_checks(v, "sim", sim.report);
  v.check(sim.seconds < 1.0, "sim " + fmt(sim.seconds) + "s < 1s");
  auto real = timed_run(s, real_mode(24300));
  failover_checks(v, "real", real.report);
  v.check(real.seconds < 30.0, "real " + fmt(real.seconds) + "s < 30s");
  return v;
}

Verdict criterion3() {
  Verdict v;
  for (const auto* stem : {"kill-balancer", "detach-volume"}) {
    auto r = run_scenario(Scenario::load(script(stem)));
    failover_checks(v, stem, r);
  }
  return v;
}

Verdict criterion4() {
  Verdict v;
  auto r = run_scenario(Scenario::load(script("rotation16")));
  v.check(r.passed(), "rotation16 pass" + failing(r));
  std::string expected;
  for (int i = 0; i < 33; ++i) expected += (i ? "," : "") + backend_name(i % 16 + 1);
  v.check(r.metrics["bench.sequence"] == expected, "two passes plus one");

  auto fair = Scenario::parse(
      "TOPOLOGY two_tier\nBACKENDS 16\nSEED 23\nDURATION 600000\n"
      "AT 3000 PROBE bench 10000\n"
      "EXPECT bench.total == 10000\nEXPECT bench.errors == 0\nEXPECT bench.spread <= 1\n"
      "EXPECT bench.distinct == 16\n",
      "fairness");
  auto f = run_scenario(fair);
  v.check(f.passed(), "n=10000 spread=" + f.metrics["bench.spread"] + failing(f));
  return v;
}

Verdict criterion5() {
  Verdict v;
  {
    SimFabric f;
    Topology t(Deployment::standard(), f);
    t.boot();
    f.run_until(10000ms);
    v.check(render(t.member("hap01")->status()) == goldens::kBothOnline, "both online");
    auto owner = t.member("hap01")->status();
    auto standby = t.member("hap02")->status();
    bool agree = owner.services == standby.services && owner.quorate == standby.quorate &&
                 owner.members.size() == standby.members.size();
    for (std::size_t i = 0; agree && i < owner.members.size(); ++i)
      agree = owner.members[i].online == standby.members[i].online &&
              owner.members[i].name == standby.members[i].name;
    v.check(agree, "standby agrees with owner");
  }
  {
    SimFabric f;
    Topology t(Deployment::standard(), f);
    t.boot();
    f.run_until(5000ms);
    f.inject(fault::Crash{"hap01"});
    f.run_until(15000ms);
    v.check(render(t.member("hap02")->status()) == goldens::kAfterCrash, "one crashed");
  }
  {
    SimFabric f;
    Topology t(Deployment::standard(2, 4), f);
    t.boot();
    f.run_until(5000ms);
    f.inject(fault::Crash{"hap02"});
    f.inject(fault::Crash{"hap03"});
    f.run_until(20000ms);
    v.check(render(t.member("hap01")->status()) == goldens::kInquorate, "inquorate 4-node");
  }
  return v;
}

Verdict criterion6() {
  Verdict v;
  auto r = run_scenario(Scenario::load(script("durability")));
  v.check(r.passed(), "durability pass" + failing(r));
  v.check(r.number("content.checked") == 101.0, "101 paths");
  v.check(r.number("content.mismatches") == 0.0 && r.number("content.failures") == 0.0,
          "identical bytes on every backend and through the vip");
  return v;
}

Verdict criterion7() {
  Verdict v;
  auto s = Scenario::load(script("split-brain"));
  int bad = 0;
  std::string first;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    RunOptions o;
    o.seed = seed;
    auto r = run_scenario(s, o);
    if (!r.passed() || !r.violations.empty()) {
      if (!bad++) first = "seed " + std::to_string(seed) + failing(r);
    }
  }
  v.check(bad == 0, std::to_string(1000 - bad) + "/1000 seeds clean" + (bad ? " " + first : ""));
  return v;
}

std::map<std::string, std::string> probe_metrics(const ScenarioReport& r) {
  std::map<std::string, std::string> out;
  for (const auto& [k, val] : r.metrics)
    if (k.starts_with("bench.") || k.starts_with("content.") || k.starts_with("write."))
      out[k] = val;
  return out;
}

Verdict criterion8() {
  Verdict v;
  for (const auto* stem : {"round-robin", "rotation16", "durability"}) {
    auto s = Scenario::load(script(stem));
    s.topology = TopologyKind::TwoTier;
    auto two = run_scenario(s);
    s.topology = TopologyKind::ThreeTier;
    auto three = run_scenario(s);
    v.check(two.passed() && three.passed(),
            std::string(stem) + " passes in both" + failing(two) + failing(three));
    v.check(probe_metrics(two) == probe_metrics(three), std::string(stem) + " same probe results");
    auto n2 = two.number("node_count"), n3 = three.number("node_count");
    v.check(n2 && n3 && *n2 + 1 == *n3,
            std::string(stem) + " nodes " + two.metrics["node_count"] + " vs " +
                three.metrics["node_count"]);
  }
  return v;
}

Verdict criterion9() {
  Verdict v;
  int runs = 0;
  for (const auto& e :
       std::filesystem::directory_iterator(std::filesystem::path(HACLUSTER_SOURCE_DIR) / "scenarios")) {
    if (e.path().extension() != ".scn") continue;
    auto s = Scenario::load(e.path());
    auto a = run_scenario(s);
    auto b = run_scenario(s);
    v.check(a.digest == b.digest && a.digest != 0, e.path().stem().string());
    ++runs;
  }
  v.check(runs >= 8, std::to_string(runs) + " scripts");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"round-robin alternation", criterion1},
      {"node-crash failover", criterion2},
      {"daemon and disk failures", criterion3},
      {"16-backend rotation and fairness", criterion4},
      {"quorum status screens", criterion5},
      {"store durability and uniformity", criterion6},
      {"split-brain safety over 1000 seeds", criterion7},
      {"two-tier vs three-tier equivalence", criterion8},
      {"same-seed determinism", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    auto t0 = Clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    std::ostringstream line;
    line << (v.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
         << fmt(seconds_since(t0)) << "s)";
    std::string detail;
    for (const auto& n : v.notes) detail += (detail.empty() ? "" : "; ") + n;
    line << " " << detail;
    std::cout << line.str() << std::endl;
    if (!v.ok) ++failed;
  }
  std::cout << (failed ? "FAIL" : "PASS") << " " << criteria.size() - failed << "/"
            << criteria.size() << " criteria" << std::endl;
  return failed ? 1 : 0;
}
