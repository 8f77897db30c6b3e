#include <gtest/gtest.h>

#include "hacluster/service_manager.hpp"

using namespace hacluster;

namespace {

MembershipSnapshot snapshot(std::vector<std::pair<std::string, bool>> online, std::string local,
                            bool two_node = true) {
  ClusterConfig c;
  MembershipSnapshot s;
  int ordinal = 0;
  for (const auto& [name, up] : online) {
    Member m;
    m.id = NodeId{name, ++ordinal};
    m.status = up ? MemberStatus::Online : MemberStatus::Offline;
    m.is_local = name == local;
    m.ever_seen = true;
    s.members.push_back(m);
    c.members.push_back({m.id, 1, ""});
  }
  c.two_node = two_node;
  s.quorum = quorum(s.members, c);
  return s;
}

PlannerInput input(MembershipSnapshot s) {
  PlannerInput in;
  in.membership = std::move(s);
  in.group.resources = {{ResourceKind::VirtualEndpoint}, {ResourceKind::SharedStore},
                        {ResourceKind::Balancer}};
  return in;
}

class FakeResource final : public Resource {
 public:
  FakeResource(ResourceKind k, bool ok = true) : kind_(k), ok_(ok) {}
  ResourceKind kind() const override { return kind_; }
  void start(std::uint64_t, std::function<void(bool)> done) override {
    status_ = ok_ ? ResourceStatus::Running : ResourceStatus::Failed;
    done(ok_);
  }
  void stop(std::function<void()> done) override {
    status_ = ResourceStatus::Stopped;
    done();
  }
  bool healthy() const override { return healthy_; }
  ResourceStatus status() const override { return status_; }

  bool healthy_ = true;

 private:
  ResourceKind kind_;
  bool ok_;
  ResourceStatus status_ = ResourceStatus::Stopped;
};

const std::vector<ResourceKind> kOrder = {ResourceKind::VirtualEndpoint,
                                          ResourceKind::SharedStore, ResourceKind::Balancer};

}  // namespace

TEST(Planner, LowestOrdinalOnlineMemberStarts) {
  auto in = input(snapshot({{"hap01", true}, {"hap02", true}}, "hap01"));
  EXPECT_EQ(evaluate(in), std::vector<Action>{Action::start()});
  auto standby = input(snapshot({{"hap01", true}, {"hap02", true}}, "hap02"));
  EXPECT_TRUE(evaluate(standby).empty());
}

TEST(Planner, SurvivorFencesThenStarts) {
  auto in = input(snapshot({{"hap01", false}, {"hap02", true}}, "hap02"));
  in.needs_fence = {"hap01"};
  in.last_owner = "hap01";
  in.last_owner_term = 1;
  EXPECT_EQ(evaluate(in), (std::vector<Action>{Action::fence("hap01"), Action::start()}));
  in.needs_fence.clear();
  in.fenced_through["hap01"] = 1;
  EXPECT_EQ(evaluate(in), std::vector<Action>{Action::start()});
}

TEST(Planner, UnfencedPreviousOwnerIsFencedEvenWithoutMemberDown) {
  auto in = input(snapshot({{"hap01", false}, {"hap02", true}}, "hap02"));
  in.last_owner = "hap01";
  in.last_owner_term = 3;
  in.fenced_through["hap01"] = 2;
  EXPECT_EQ(evaluate(in), (std::vector<Action>{Action::fence("hap01"), Action::start()}));
}

TEST(Planner, InquorateOwnerStops) {
  auto in = input(snapshot({{"hap01", true}, {"hap02", false}, {"hap03", false}, {"hap04", true}},
                           "hap01", false));
  EXPECT_FALSE(in.membership.quorum.quorate);
  in.group.owner = "hap01";
  in.group.state = GroupState::Started;
  EXPECT_EQ(evaluate(in), std::vector<Action>{Action::stop()});
  in.group.state = GroupState::Stopped;
  EXPECT_TRUE(evaluate(in).empty());
}

TEST(Planner, ExcludedNodeIsSkipped) {
  auto in = input(snapshot({{"hap01", true}, {"hap02", true}}, "hap02"));
  in.excluded = {"hap01"};
  EXPECT_EQ(evaluate(in), std::vector<Action>{Action::start()});
}

TEST(Planner, PeerAlreadyOwningMeansNoAction) {
  auto s = snapshot({{"hap01", true}, {"hap02", true}}, "hap01");
  s.members[1].owner_term = 4;
  auto in = input(s);
  EXPECT_TRUE(evaluate(in).empty());
  EXPECT_EQ(live_owner(in), "hap02");
}

TEST(Planner, FailbackRelocatesToPreferredMember) {
  auto in = input(snapshot({{"hap01", true}, {"hap02", true}}, "hap02"));
  in.group.owner = "hap02";
  in.group.state = GroupState::Started;
  in.failback = true;
  EXPECT_EQ(evaluate(in), std::vector<Action>{Action::relocate("hap01")});
  in.failback = false;
  EXPECT_TRUE(evaluate(in).empty());
}

TEST(GroupController, StartsInOrderAndStopsInReverse) {
  FakeResource vip(ResourceKind::VirtualEndpoint), store(ResourceKind::SharedStore),
      lb(ResourceKind::Balancer);
  LifecycleLog log;
  GroupController g("hap01", {&vip, &store, &lb}, &log, nullptr);
  std::optional<std::optional<ResourceKind>> result;
  g.start(true, 1, [&](std::optional<ResourceKind> failed) { result = failed; });
  ASSERT_TRUE(result);
  EXPECT_FALSE(*result);
  bool stopped = false;
  g.stop([&] { stopped = true; });
  EXPECT_TRUE(stopped);
  auto ev = log.events();
  ASSERT_EQ(ev.size(), 6u);
  std::vector<ResourceKind> kinds;
  for (const auto& e : ev) kinds.push_back(e.kind);
  EXPECT_EQ(kinds, (std::vector<ResourceKind>{ResourceKind::VirtualEndpoint,
                                              ResourceKind::SharedStore, ResourceKind::Balancer,
                                              ResourceKind::Balancer, ResourceKind::SharedStore,
                                              ResourceKind::VirtualEndpoint}));
  EXPECT_TRUE(log.ordered(kOrder));
}

TEST(GroupController, FailedStartRollsBackWhatStarted) {
  FakeResource vip(ResourceKind::VirtualEndpoint), store(ResourceKind::SharedStore, false),
      lb(ResourceKind::Balancer);
  LifecycleLog log;
  GroupController g("hap01", {&vip, &store, &lb}, &log, nullptr);
  std::optional<ResourceKind> failed;
  g.start(true, 1, [&](std::optional<ResourceKind> f) { failed = f; });
  EXPECT_EQ(failed, ResourceKind::SharedStore);
  EXPECT_EQ(vip.status(), ResourceStatus::Stopped);
  EXPECT_EQ(lb.status(), ResourceStatus::Stopped);
  EXPECT_TRUE(log.ordered(kOrder));
}

TEST(GroupController, InquorateStartTouchesNothing) {
  FakeResource vip(ResourceKind::VirtualEndpoint);
  LifecycleLog log;
  GroupController g("hap01", {&vip}, &log, nullptr);
  try {
    g.start(false, 1, [](std::optional<ResourceKind>) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotQuorate);
  }
  EXPECT_TRUE(log.events().empty());
}

TEST(GroupController, MonitorReportsFirstUnhealthyResource) {
  FakeResource vip(ResourceKind::VirtualEndpoint), store(ResourceKind::SharedStore),
      lb(ResourceKind::Balancer);
  GroupController g("hap01", {&vip, &store, &lb}, nullptr, nullptr);
  EXPECT_FALSE(g.monitor());
  lb.healthy_ = false;
  EXPECT_EQ(g.monitor(), ResourceKind::Balancer);
  store.healthy_ = false;
  EXPECT_EQ(g.monitor(), ResourceKind::SharedStore);
}

TEST(LifecycleLog, DetectsOutOfOrderSequences) {
  LifecycleLog log;
  log.append({Millis(0), "hap01", ResourceKind::SharedStore, true, true, false});
  EXPECT_FALSE(log.ordered(kOrder));
  LifecycleLog reset;
  reset.append({Millis(0), "hap01", ResourceKind::VirtualEndpoint, true, true, false});
  reset.node_reset("hap01", Millis(5));
  reset.append({Millis(9), "hap01", ResourceKind::VirtualEndpoint, true, true, false});
  EXPECT_TRUE(reset.ordered(kOrder));
}

TEST(ResourceKind, NamesParse) {
  EXPECT_EQ(parse_resource_kind("balancer"), ResourceKind::Balancer);
  EXPECT_EQ(parse_resource_kind("HAProxy"), ResourceKind::Balancer);
  EXPECT_EQ(parse_resource_kind("nfs"), ResourceKind::SharedStore);
  EXPECT_EQ(parse_resource_kind("vip"), ResourceKind::VirtualEndpoint);
  EXPECT_FALSE(parse_resource_kind("disk"));
}
