#include <gtest/gtest.h>

#include <set>

#include "hacluster/config.hpp"

using namespace hacluster;

TEST(Config, StandardDeploymentIsValid) {
  auto d = Deployment::standard();
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.cluster.members.size(), 2u);
  EXPECT_EQ(d.backends.size(), 2u);
  EXPECT_EQ(d.cluster.name, "HAPROXYCL");
  EXPECT_EQ(d.service.vip, "192.168.1.20");
  EXPECT_EQ(d.node_count(), 4u);
  d.topology = TopologyKind::ThreeTier;
  EXPECT_EQ(d.node_count(), 5u);
}

TEST(Config, JsonRoundTrip) {
  auto d = Deployment::standard(16);
  d.topology = TopologyKind::ThreeTier;
  d.fabric.seed = 99;
  d.fabric.drop_rate = 0.125;
  d.health.fall_count = 3;
  d.timings.cooldown = Millis(4321);
  auto back = Deployment::parse(d.to_json());
  EXPECT_EQ(back.to_json(), d.to_json());
  EXPECT_EQ(back.backends.size(), 16u);
  EXPECT_EQ(back.topology, TopologyKind::ThreeTier);
  EXPECT_EQ(back.fabric.seed, 99u);
  EXPECT_EQ(back.health.fall_count, 3);
  EXPECT_EQ(back.timings.cooldown, Millis(4321));
}

TEST(Config, BundledFilesLoad) {
  auto two = Deployment::load(std::string(HACLUSTER_SOURCE_DIR) + "/configs/two_tier.json");
  auto three = Deployment::load(std::string(HACLUSTER_SOURCE_DIR) + "/configs/three_tier.json");
  EXPECT_EQ(two.topology, TopologyKind::TwoTier);
  EXPECT_EQ(three.topology, TopologyKind::ThreeTier);
  EXPECT_EQ(two.node_count() + 1, three.node_count());
}

TEST(Config, RejectsBadDocuments) {
  auto bad = [](auto mutate) {
    auto d = Deployment::standard();
    mutate(d);
    EXPECT_THROW(Deployment::parse(d.to_json()), Error);
  };
  bad([](Deployment& d) { d.backends.clear(); });
  bad([](Deployment& d) { d.backends = Deployment::standard(16).backends; d.backends.push_back({"node17", ""}); });
  bad([](Deployment& d) { d.backends[1].id = "node01"; });
  bad([](Deployment& d) { d.backends[0].id = "hap01"; });
  bad([](Deployment& d) { d.store.exports.clear(); });
  bad([](Deployment& d) { d.fabric.drop_rate = 1.5; });
  bad([](Deployment& d) { d.cluster.members[1].id.ordinal = 1; });
  EXPECT_THROW(Deployment::parse("{not json"), Error);
  EXPECT_THROW(Deployment::load("/nonexistent/cluster.json"), Error);
}

TEST(Config, PortsAreDistinctAndStable) {
  auto d = Deployment::standard(16);
  d.topology = TopologyKind::ThreeTier;
  std::set<int> ports;
  std::vector<std::string> names = {"registry", "fence", d.store_node};
  for (const auto& m : d.cluster.members) names.push_back(m.id.name);
  for (const auto& b : d.backends) names.push_back(b.id);
  for (const auto& n : names) EXPECT_TRUE(ports.insert(d.port_for(n)).second) << n;
  EXPECT_EQ(d.port_for("hap01"), d.fabric.base_port + 1);
  EXPECT_EQ(d.port_for("registry"), d.fabric.base_port + 70);
}

TEST(Config, NameHelpers) {
  EXPECT_EQ(backend_name(1), "node01");
  EXPECT_EQ(backend_name(16), "node16");
  EXPECT_EQ(member_name(2), "hap02");
}
