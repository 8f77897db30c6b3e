#include <gtest/gtest.h>

#include "hacluster/protocol.hpp"
#include "hacluster/topology.hpp"

using namespace hacluster;
using namespace std::chrono_literals;

namespace {

struct Cluster {
  explicit Cluster(Deployment d = Deployment::standard()) : t(std::move(d), f) {
    t.boot();
    f.run_until(3000ms);
  }

  BenchResult bench(int n, bool reuse, const std::string& who = "client1") {
    std::optional<BenchResult> out;
    t.client(who).bench(n, reuse, [&](BenchResult r) { out = std::move(r); });
    for (int i = 0; i < 600 && !out; ++i) f.run_for(100ms);
    EXPECT_TRUE(out);
    return out.value_or(BenchResult{});
  }

  std::optional<std::string> ask(const std::string& to, std::string body, Millis timeout) {
    std::optional<std::string> out;
    bool done = false;
    t.client("admin").ask(to, std::move(body), timeout, [&](std::optional<std::string> r) {
      out = std::move(r);
      done = true;
    });
    while (!done) f.run_for(10ms);
    return out;
  }

  SimFabric f;
  Topology t;
};

}  // namespace

TEST(Cluster, BootElectsLowestOrdinal) {
  Cluster c;
  auto owner = c.t.owner();
  ASSERT_TRUE(owner);
  EXPECT_EQ(owner->owner, "hap01");
  EXPECT_TRUE(c.t.member("hap01")->serving());
  EXPECT_FALSE(c.t.member("hap02")->serving());
  EXPECT_EQ(c.t.member("hap01")->resource_order(),
            (std::vector<ResourceKind>{ResourceKind::VirtualEndpoint, ResourceKind::SharedStore,
                                       ResourceKind::Balancer}));
}

TEST(Cluster, ReusedCookieSticksToOneBackend) {
  Cluster c;
  auto r = c.bench(100, true);
  EXPECT_EQ(r.total, 100u);
  EXPECT_EQ(r.errors, 0u);
  ASSERT_EQ(r.per_backend.size(), 1u);
  EXPECT_EQ(r.per_backend.begin()->second, 100u);
}

TEST(Cluster, FreshClientsAlternate) {
  Cluster c;
  auto r = c.bench(6, false);
  EXPECT_EQ(r.serverid_sequence,
            (std::vector<std::string>{"node01", "node02", "node01", "node02", "node01", "node02"}));
  for (auto n : r.set_cookie_counts) EXPECT_EQ(n, 1u);
  auto stats = c.t.member("hap01")->balancer_stats();
  ASSERT_TRUE(stats);
  EXPECT_EQ(stats->backends[0].requests, 3u);
}

TEST(Cluster, OperatorRelocation) {
  Cluster c;
  const auto before = c.t.owner()->epoch;
  auto reply = c.ask("hap01", wire::relocate("hap02"), 5000ms);
  ASSERT_TRUE(reply);
  EXPECT_FALSE(reply->starts_with("ERR")) << *reply;
  c.f.run_for(3000ms);
  auto after = c.t.owner();
  ASSERT_TRUE(after);
  EXPECT_EQ(after->owner, "hap02");
  EXPECT_GT(after->epoch, before);
  EXPECT_TRUE(c.t.lifecycle().ordered({ResourceKind::VirtualEndpoint, ResourceKind::SharedStore,
                                       ResourceKind::Balancer}));
  EXPECT_TRUE(c.t.safety().ok());
  EXPECT_EQ(c.bench(4, false).errors, 0u);
}

TEST(Cluster, RelocateToUnknownMemberFails) {
  Cluster c;
  auto reply = c.ask("hap01", wire::relocate("hap09"), 5000ms);
  ASSERT_TRUE(reply);
  EXPECT_TRUE(reply->starts_with("ERR")) << *reply;
  EXPECT_EQ(c.t.owner()->owner, "hap01");
}

TEST(Cluster, KilledStoreMovesTheGroup) {
  Cluster c;
  c.f.inject(fault::KillProcess{"hap01", "store"});
  c.f.run_for(10000ms);
  EXPECT_EQ(c.t.owner()->owner, "hap02");
  EXPECT_TRUE(c.t.safety().ok());
  EXPECT_EQ(c.bench(4, false).errors, 0u);
}

TEST(Cluster, BackendsRemountAgainstTheNewServer) {
  Cluster c;
  c.bench(2, false);
  auto first = c.t.backend("node01")->binding();
  ASSERT_TRUE(first);
  c.f.inject(fault::Crash{"hap01"});
  c.f.run_for(10000ms);
  auto r = c.bench(4, false);
  EXPECT_EQ(r.errors, 0u);
  for (const auto* id : {"node01", "node02"}) {
    auto b = c.t.backend(id)->binding();
    ASSERT_TRUE(b) << id;
    EXPECT_GT(b->server_epoch, first->server_epoch) << id;
  }
}

// Both sides ask to fence; the higher ordinal waits, so the owner survives
// and the standby is powered off and comes back under a new incarnation.
TEST(Cluster, PartitionedStandbyIsFencedAndRebootsWithHigherIncarnation) {
  Cluster c;
  const auto inc = c.t.member("hap02")->incarnation();
  c.f.inject(fault::PartitionGroups{{{"hap01"}, {"hap02"}}});
  c.f.run_for(8000ms);
  EXPECT_EQ(c.t.owner()->owner, "hap01");
  ASSERT_FALSE(c.f.fences().events().empty());
  EXPECT_EQ(c.f.fences().events().front().node, "hap02");
  c.f.inject(fault::Heal{});
  c.f.run_for(10000ms);
  auto* back = c.t.member("hap02");
  ASSERT_NE(back, nullptr);
  EXPECT_GT(back->incarnation(), inc);
  EXPECT_FALSE(back->serving());
  EXPECT_TRUE(c.t.member("hap01")->membership().find("hap02")->online());
  auto safety = c.t.safety();
  EXPECT_TRUE(safety.ok()) << safety.violations.front();
  EXPECT_EQ(c.bench(4, false).errors, 0u);
}

TEST(Cluster, WritesSurviveFailover) {
  Cluster c;
  bool ok = false;
  c.t.client("admin").store_write("/index.html", "rewritten\n", [&](bool r) { ok = r; });
  c.f.run_for(2000ms);
  ASSERT_TRUE(ok);
  c.f.inject(fault::Crash{"hap01"});
  c.f.run_for(10000ms);
  std::optional<Outcome> got;
  http::Request get;
  get.method = "GET";
  get.path = "/index.html";
  c.t.client("client1").request(get, [&](Outcome o) { got = std::move(o); });
  for (int i = 0; i < 100 && !got; ++i) c.f.run_for(100ms);
  ASSERT_TRUE(got && got->ok());
  EXPECT_EQ(got->response->body, "rewritten\n");
  EXPECT_EQ(got->origin, "hap02");
}

TEST(Cluster, ThreeTierBehavesTheSameFromOutside) {
  auto d = Deployment::standard();
  d.topology = TopologyKind::ThreeTier;
  Cluster c(d);
  EXPECT_EQ(c.t.node_count(), 5u);
  auto r = c.bench(6, false);
  EXPECT_EQ(r.errors, 0u);
  EXPECT_EQ(r.serverid_sequence.front(), "node01");
  EXPECT_EQ(r.serverid_sequence.back(), "node02");
}
