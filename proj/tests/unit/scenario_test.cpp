#include <gtest/gtest.h>

#include <filesystem>

#include "hacluster/scenario.hpp"

using namespace hacluster;

namespace {

std::string parse_error(std::string_view text) {
  try {
    Scenario::parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ScriptParseError);
    return e.what();
  }
  return "";
}

std::filesystem::path bundled(const std::string& stem) {
  return std::filesystem::path(HACLUSTER_SOURCE_DIR) / "scenarios" / (stem + ".scn");
}

}  // namespace

TEST(ScenarioParse, Directives) {
  auto s = Scenario::parse(
      "NAME demo\n"
      "# comment\n"
      "TOPOLOGY three_tier\nBACKENDS 4\nSEED 9\nLATENCY 2\nDROP 0.05\nDURATION 12000\n"
      "AT 1000 PROBE bench 6\n"
      "AT 5000+2000 INJECT partition hap01 | hap02,node01\n"
      "EXPECT bench.total == 6\n");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.topology, TopologyKind::ThreeTier);
  EXPECT_EQ(s.backends, 4);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.latency, Millis(2));
  EXPECT_DOUBLE_EQ(*s.drop_rate, 0.05);
  EXPECT_EQ(s.duration, Millis(12000));
  ASSERT_EQ(s.steps.size(), 2u);
  EXPECT_EQ(s.steps[1].jitter, Millis(2000));
  EXPECT_EQ(s.steps[1].line, 10);
  auto f = parse_fault(s.steps[1].args);
  auto* p = std::get_if<fault::PartitionGroups>(&f);
  ASSERT_NE(p, nullptr);
  ASSERT_EQ(p->groups.size(), 2u);
  EXPECT_EQ(p->groups[1], (std::set<std::string>{"hap02", "node01"}));
  ASSERT_EQ(s.expectations.size(), 1u);
  EXPECT_EQ(s.expectations[0].op, "==");
}

TEST(ScenarioParse, ErrorsNameTheLine) {
  EXPECT_NE(parse_error("SEED 1\nAT soon INJECT crash hap01\n").find("line 2"), std::string::npos);
  EXPECT_NE(parse_error("BOGUS\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error("\n\nAT 10 INJECT explode hap01\n").find("line 3"), std::string::npos);
  EXPECT_NE(parse_error("EXPECT owner ~= hap01\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error("AT 10 PROBE teleport\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error("TOPOLOGY mesh\n").find("line 1"), std::string::npos);
}

TEST(ScenarioParse, Faults) {
  EXPECT_TRUE(std::holds_alternative<fault::Crash>(parse_fault({"crash", "hap01"})));
  EXPECT_TRUE(std::holds_alternative<fault::Heal>(parse_fault({"heal"})));
  auto k = std::get<fault::KillProcess>(parse_fault({"kill", "hap01", "balancer"}));
  EXPECT_EQ(k.resource, "balancer");
  EXPECT_FALSE(std::get<fault::DetachVolume>(parse_fault({"detach-volume"})).node);
  EXPECT_FALSE(std::get<fault::FenceAck>(parse_fault({"fence-off"})).enabled);
  EXPECT_THROW(parse_fault({"crash"}), Error);
}

TEST(ScenarioRun, BundledScriptsPass) {
  int ran = 0;
  for (const auto& entry :
       std::filesystem::directory_iterator(std::filesystem::path(HACLUSTER_SOURCE_DIR) / "scenarios")) {
    if (entry.path().extension() != ".scn") continue;
    auto report = run_scenario(Scenario::load(entry.path()));
    EXPECT_TRUE(report.passed()) << report.render();
    ++ran;
  }
  EXPECT_GE(ran, 8);
}

TEST(ScenarioRun, SameSeedSameDigestAndReport) {
  auto s = Scenario::load(bundled("failover-node-crash"));
  auto a = run_scenario(s);
  auto b = run_scenario(s);
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_EQ(a.render(), b.render());
  RunOptions other;
  other.seed = 8;
  EXPECT_NE(run_scenario(s, other).digest, a.digest);
}

TEST(ScenarioRun, FailingExpectationIsReported) {
  auto s = Scenario::parse("DURATION 4000\nAT 2000 PROBE bench 2\nEXPECT bench.total == 3\n");
  auto r = run_scenario(s);
  EXPECT_FALSE(r.passed());
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].actual, "2");
  EXPECT_NE(r.render().find("result FAIL"), std::string::npos);
}
