#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "hacluster/actor.hpp"
#include "hacluster/loopback_fabric.hpp"

using namespace hacluster;
using namespace std::chrono_literals;

namespace {

class Echo final : public Actor {
 public:
  Echo(Fabric& f, std::string name, EndpointClass cls = EndpointClass::Node)
      : Actor(f, std::move(name), cls) {
    attach();
  }
  ~Echo() override { detach(); }

  std::vector<std::string> got;
  void tell(const std::string& to, std::string body, std::uint64_t epoch = 0) {
    send(to, std::move(body), epoch);
  }
  void ask(const std::string& to, std::string body, Millis timeout, ReplyFn done) {
    call(to, std::move(body), timeout, std::move(done));
  }
  void later(Millis d, std::function<void()> fn) { after(d, std::move(fn)); }

 protected:
  void on_message(const Envelope& e) override {
    got.push_back(e.body);
    if (e.body.starts_with("ping")) reply(e, "pong " + e.body.substr(5));
  }
};

// Ping-pong traffic with drops; returns the trace digest.
std::uint64_t run_chatter(std::uint64_t seed, double drop) {
  FabricConfig cfg;
  cfg.seed = seed;
  cfg.drop_rate = drop;
  cfg.base_latency = 3ms;
  SimFabric f(cfg);
  Echo a(f, "a"), b(f, "b"), c(f, "c");
  for (int i = 0; i < 200; ++i) {
    a.tell("b", "m" + std::to_string(i));
    b.tell("c", "m" + std::to_string(i));
    c.tell("a", "m" + std::to_string(i));
    f.run_for(1ms);
  }
  f.run_for(1s);
  return f.digest();
}

}  // namespace

TEST(SimFabric, PerPairFifoWithJitter) {
  FabricConfig cfg;
  cfg.base_latency = 10ms;
  SimFabric f(cfg);
  Echo a(f, "a"), b(f, "b");
  for (int i = 0; i < 100; ++i) a.tell("b", std::to_string(i));
  f.run_for(1s);
  ASSERT_EQ(b.got.size(), 100u);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(b.got[static_cast<std::size_t>(i)], std::to_string(i));
}

TEST(SimFabric, SameSeedSameDigest) {
  EXPECT_EQ(run_chatter(5, 0.1), run_chatter(5, 0.1));
  EXPECT_NE(run_chatter(5, 0.1), run_chatter(6, 0.1));
}

TEST(SimFabric, PartitionSeparatesNodesButNotInfrastructure) {
  SimFabric f;
  Echo hap01(f, "hap01"), hap02(f, "hap02"), web(f, "node01"),
      reg(f, "registry", EndpointClass::Infrastructure);
  f.inject(fault::PartitionGroups{{{"hap01"}, {"hap02", "node01"}}});
  hap01.tell("hap02", "hb");
  hap02.tell("hap01", "hb");
  hap02.tell("node01", "same side");
  hap01.tell("registry", "always");
  f.run_for(100ms);
  EXPECT_TRUE(hap01.got.empty());
  EXPECT_TRUE(hap02.got.empty());
  EXPECT_EQ(web.got.size(), 1u);
  EXPECT_EQ(reg.got.size(), 1u);
  f.inject(fault::Heal{});
  hap01.tell("hap02", "hb");
  f.run_for(100ms);
  EXPECT_EQ(hap02.got.size(), 1u);
}

TEST(SimFabric, OverlappingPartitionGroupsAreRejected) {
  SimFabric f;
  Echo a(f, "a"), b(f, "b");
  EXPECT_THROW(f.inject(fault::PartitionGroups{{{"a", "b"}, {"b"}}}), Error);
  EXPECT_THROW(f.inject(fault::Crash{"zz"}), Error);
}

TEST(SimFabric, FenceBlocksServiceTrafficAtOrBelowMark) {
  SimFabric f;
  Echo owner(f, "hap01"), client(f, "client1");
  f.fences().fence("hap01", 2, 1, f.now());
  owner.tell("client1", "HTTP/1.1 200 OK", 2);
  owner.tell("client1", "HTTP/1.1 200 OK", 1);
  owner.tell("client1", "control", 0);
  owner.tell("client1", "HTTP/1.1 200 OK", 3);
  f.run_for(100ms);
  EXPECT_EQ(client.got, (std::vector<std::string>{"control", "HTTP/1.1 200 OK"}));
}

TEST(SimFabric, CrashSilencesEndpointAndItsTimers) {
  SimFabric f;
  Echo a(f, "a"), b(f, "b");
  int fired = 0;
  a.later(50ms, [&] { ++fired; });
  f.inject(fault::Crash{"a"});
  b.tell("a", "lost");
  a.tell("b", "also lost");
  f.run_for(1s);
  EXPECT_EQ(fired, 0);
  EXPECT_TRUE(a.got.empty());
  EXPECT_TRUE(b.got.empty());
}

TEST(SimFabric, CallTimesOutWhenPeerIsGone) {
  SimFabric f;
  Echo a(f, "a");
  std::optional<bool> answered;
  a.ask("nobody", "ping x", 300ms, [&](std::optional<Envelope> e) { answered = e.has_value(); });
  f.run_for(299ms);
  EXPECT_FALSE(answered);
  f.run_for(2ms);
  ASSERT_TRUE(answered);
  EXPECT_FALSE(*answered);
}

TEST(SimFabric, DropRateDropsRoughlyThatShare) {
  FabricConfig cfg;
  cfg.drop_rate = 0.25;
  SimFabric f(cfg);
  Echo a(f, "a"), b(f, "b");
  for (int i = 0; i < 4000; ++i) a.tell("b", "x");
  f.run_for(1s);
  EXPECT_NEAR(static_cast<double>(b.got.size()) / 4000.0, 0.75, 0.03);
}

TEST(LoopbackFabric, FrameRoundTrip) {
  Envelope e{"hap01", "registry", 7, 3, 2, "BIND 192.168.1.20 hap01 2 1\nsecond line"};
  auto back = LoopbackFabric::decode(LoopbackFabric::encode(e));
  ASSERT_TRUE(back);
  EXPECT_EQ(back->from, e.from);
  EXPECT_EQ(back->to, e.to);
  EXPECT_EQ(back->id, 7u);
  EXPECT_EQ(back->reply_to, 3u);
  EXPECT_EQ(back->epoch, 2u);
  EXPECT_EQ(back->body, e.body);
  EXPECT_FALSE(LoopbackFabric::decode("a\nb\nc"));
}

TEST(LoopbackFabric, RequestReplyOverTcp) {
  FabricConfig cfg;
  cfg.mode = FabricMode::RealLoopback;
  LoopbackFabric f(cfg, [](const std::string&) { return 0; });  // ephemeral ports
  Echo a(f, "a"), b(f, "b");
  EXPECT_GT(f.port("a"), 0);
  std::promise<std::string> answer;
  f.schedule("a", 0ms, [&] {
    a.ask("b", "ping 42", 2000ms, [&](std::optional<Envelope> e) {
      answer.set_value(e ? e->body : "timeout");
    });
  });
  auto fut = answer.get_future();
  ASSERT_EQ(fut.wait_for(5s), std::future_status::ready);
  EXPECT_EQ(fut.get(), "pong 42");
}

TEST(LoopbackFabric, OrderedDeliveryAndCrash) {
  LoopbackFabric f(FabricConfig{}, [](const std::string&) { return 0; });
  Echo a(f, "a"), b(f, "b");
  std::promise<void> sent;
  f.schedule("a", 0ms, [&] {
    for (int i = 0; i < 50; ++i) a.tell("b", std::to_string(i));
    sent.set_value();
  });
  sent.get_future().wait();
  std::vector<std::string> got;
  for (int spin = 0; spin < 200; ++spin) {
    std::promise<std::vector<std::string>> snap;
    f.schedule("b", 0ms, [&] { snap.set_value(b.got); });
    got = snap.get_future().get();
    if (got.size() == 50) break;
    std::this_thread::sleep_for(10ms);
  }
  ASSERT_EQ(got.size(), 50u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(got[static_cast<std::size_t>(i)], std::to_string(i));

  f.inject(fault::Crash{"b"});
  EXPECT_TRUE(f.crashed("b"));
}
