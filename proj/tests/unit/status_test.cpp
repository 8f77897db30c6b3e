#include <gtest/gtest.h>

#include "hacluster/topology.hpp"
#include "status_goldens.hpp"

using namespace hacluster;
using namespace std::chrono_literals;
using namespace goldens;

namespace {

StatusReport sample() {
  StatusReport r;
  r.cluster_name = "HAPROXYCL";
  r.timestamp_ms = kSimWallBase + 10000;
  r.quorate = true;
  r.members = {{"hap01", 1, true, true, true}, {"hap02", 2, true, false, true}};
  r.services = {{"service:HAPC", "started", "hap01", ""}};
  return r;
}

}  // namespace

TEST(StatusRender, HandBuiltReportMatchesGolden) { EXPECT_EQ(render(sample()), kBothOnline); }

TEST(StatusRender, TimestampFormat) {
  EXPECT_EQ(format_timestamp(kSimWallBase), "Thu Jan  1 00:00:00 2026");
  EXPECT_EQ(format_timestamp(1792144805000), "Fri Oct 16 10:00:05 2026");
}

TEST(StatusRender, JsonRoundTripAndByteDeterminism) {
  auto r = sample();
  auto back = StatusReport::from_json(r.to_json());
  EXPECT_EQ(back, r);
  EXPECT_EQ(render(back), render(r));
  EXPECT_THROW(StatusReport::from_json("{\"cluster\":1}"), Error);
}

TEST(StatusLive, BothMembersOnline) {
  SimFabric f;
  Topology t(Deployment::standard(), f);
  t.boot();
  f.run_until(10000ms);
  EXPECT_EQ(render(t.member("hap01")->status()), kBothOnline);
  // The standby names the same owner.
  auto standby = t.member("hap02")->status();
  EXPECT_EQ(standby.services[0].owner, "hap01");
  EXPECT_EQ(standby.services[0].state, "started");
}

TEST(StatusLive, SurvivorViewAfterCrash) {
  SimFabric f;
  Topology t(Deployment::standard(), f);
  t.boot();
  f.run_until(5000ms);
  f.inject(fault::Crash{"hap01"});
  f.run_until(15000ms);
  EXPECT_EQ(render(t.member("hap02")->status()), kAfterCrash);
}

TEST(StatusLive, FourMembersTwoLeftIsInquorate) {
  SimFabric f;
  Topology t(Deployment::standard(2, 4), f);
  t.boot();
  f.run_until(5000ms);
  f.inject(fault::Crash{"hap02"});
  f.inject(fault::Crash{"hap03"});
  f.run_until(20000ms);
  EXPECT_EQ(render(t.member("hap01")->status()), kInquorate);
  EXPECT_FALSE(t.member("hap01")->serving());
}

TEST(StatusLive, SameSeedSameBytes) {
  auto once = [] {
    SimFabric f;
    Topology t(Deployment::standard(), f);
    t.boot();
    f.run_until(7000ms);
    return render(t.member("hap02")->status()) + t.member("hap01")->status().to_json();
  };
  EXPECT_EQ(once(), once());
}
