#include <gtest/gtest.h>

#include <map>
#include <random>

#include "hacluster/balancer.hpp"
#include "hacluster/config.hpp"

using namespace hacluster;

namespace {

std::vector<Backend> pool_of(int n) {
  std::vector<Backend> p;
  for (int i = 1; i <= n; ++i) p.push_back(Backend{backend_name(i), "", Health::Up, 0, 0});
  return p;
}

http::Request with_cookie(const std::string& id) {
  http::Request r;
  r.method = "HEAD";
  r.headers.emplace_back("Cookie", "SERVERID=" + id);
  return r;
}

// Oracle for the rotation rule: walk the cyclic pool order one slot at a time
// and hand out the first Up slot after the previously served one.
class CursorModel {
 public:
  explicit CursorModel(std::size_t n) : up_(n, true) {}
  void set(std::size_t i, bool up) { up_[i] = up; }
  std::optional<std::size_t> next() {
    for (std::size_t walked = 0; walked < up_.size(); ++walked) {
      std::size_t slot = pos_;
      pos_ = (pos_ + 1) % up_.size();
      if (up_[slot]) return slot;
    }
    return std::nullopt;
  }

 private:
  std::vector<bool> up_;
  std::size_t pos_ = 0;
};

}  // namespace

TEST(Scheduler, TwoBackendsAlternateStrictly) {
  auto s = SchedulerState::make(pool_of(2));
  std::vector<std::string> seen;
  for (int i = 0; i < 4; ++i) {
    auto [b, next] = next_backend(s);
    seen.push_back(b.id);
    s = next;
  }
  EXPECT_EQ(seen, (std::vector<std::string>{"node01", "node02", "node01", "node02"}));
}

TEST(Scheduler, SixteenBackendsWrapAfterNode16) {
  auto s = SchedulerState::make(pool_of(16));
  std::vector<std::string> seen;
  for (int i = 0; i < 17; ++i) {
    auto [b, next] = next_backend(s);
    seen.push_back(b.id);
    s = next;
    ASSERT_LT(s.cursor, 16u);
  }
  for (int i = 0; i < 16; ++i) EXPECT_EQ(seen[static_cast<std::size_t>(i)], backend_name(i + 1));
  EXPECT_EQ(seen[16], "node01");
}

TEST(Scheduler, SkipsDownBackends) {
  auto p = pool_of(2);
  p[0].health = Health::Down;
  auto s = SchedulerState::make(p);
  for (int i = 0; i < 5; ++i) {
    auto [b, next] = next_backend(s);
    EXPECT_EQ(b.id, "node02");
    s = next;
  }
  s.pool[1].health = Health::Down;
  try {
    next_backend(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoHealthyBackend);
  }
}

TEST(Scheduler, PoolSizeAndIdsAreValidated) {
  EXPECT_THROW(SchedulerState::make({}), Error);
  EXPECT_THROW(SchedulerState::make(pool_of(17)), Error);
  auto dup = pool_of(2);
  dup[1].id = "node01";
  EXPECT_THROW(SchedulerState::make(dup), Error);
}

TEST(Scheduler, MatchesCursorModelUnderRandomHealthChanges) {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 16)(rng);
    auto s = SchedulerState::make(pool_of(n));
    CursorModel model(static_cast<std::size_t>(n));
    for (int step = 0; step < 200; ++step) {
      if (std::uniform_int_distribution<int>(0, 4)(rng) == 0) {
        auto i = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, n - 1)(rng));
        const bool up = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
        s.pool[i].health = up ? Health::Up : Health::Down;
        model.set(i, up);
      }
      auto expected = model.next();
      if (!expected) {
        EXPECT_THROW(next_backend(s), Error);
        continue;
      }
      auto [b, next] = next_backend(s);
      ASSERT_EQ(b.id, backend_name(static_cast<int>(*expected) + 1)) << trial << "/" << step;
      s = next;
    }
  }
}

TEST(Scheduler, FairnessBoundForRandomPoolsAndCounts) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 16)(rng);
    const int n = std::uniform_int_distribution<int>(1, 10000)(rng);
    auto s = SchedulerState::make(pool_of(k));
    std::map<std::string, int> counts;
    for (int i = 0; i < n; ++i) {
      auto [b, next] = next_backend(s);
      ++counts[b.id];
      s = next;
    }
    for (int i = 1; i <= k; ++i) {
      const int c = counts[backend_name(i)];
      EXPECT_TRUE(c == n / k || c == (n + k - 1) / k) << "k=" << k << " n=" << n << " c=" << c;
    }
  }
}

TEST(Scheduler, SeventeenHundredOverSixteen) {
  Balancer b(pool_of(16));
  std::map<std::string, int> counts;
  for (int i = 0; i < 1700; ++i) ++counts[b.select(http::Request{})->backend_id];
  for (const auto& [id, c] : counts) EXPECT_TRUE(c == 106 || c == 107) << id << " " << c;
}

TEST(Health, HysteresisFallAndRise) {
  HealthPolicy p;
  Backend b{"node02", "", Health::Up, 0, 0};
  b = apply_probe(b, false, p);
  EXPECT_TRUE(b.up());
  b = apply_probe(b, true, p);  // a success resets the failure streak
  b = apply_probe(b, false, p);
  EXPECT_TRUE(b.up());
  b = apply_probe(b, false, p);
  EXPECT_FALSE(b.up());
  EXPECT_EQ(b.consecutive_fail, 0);
  b = apply_probe(b, true, p);
  EXPECT_FALSE(b.up());
  b = apply_probe(b, true, p);
  EXPECT_TRUE(b.up());
  EXPECT_EQ(b.consecutive_ok, 0);
}

TEST(Balancer, CookieLessRequestsGetExactlyOneServerIdCookie) {
  Balancer bal(pool_of(2));
  auto upstream = [](const Backend& be, const http::Request&) {
    http::Response r;
    r.headers.emplace_back("Server", "Apache/2.2.15");
    r.headers.emplace_back("X-Powered-By", "PHP/5.3.3");
    r.headers.emplace_back("Set-Cookie", "SERVERID=bogus; path=/");
    r.headers.emplace_back("X-Backend", be.id);
    return std::optional<http::Response>(r);
  };
  http::Request head;
  head.method = "HEAD";
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    auto ex = bal.route(head, upstream);
    ASSERT_TRUE(ex.selected);
    ids.push_back(*ex.selected);
    EXPECT_EQ(http::count_header(ex.response.headers, "Set-Cookie"), 1u);
    EXPECT_EQ(http::find_header(ex.response.headers, "Set-Cookie"),
              "SERVERID=" + *ex.selected + "; path=/");
    // Other upstream headers pass through untouched and in order.
    EXPECT_EQ(ex.response.headers[0], (std::pair<std::string, std::string>{"Server", "Apache/2.2.15"}));
    EXPECT_EQ(ex.response.headers[1],
              (std::pair<std::string, std::string>{"X-Powered-By", "PHP/5.3.3"}));
    EXPECT_EQ(http::find_header(ex.response.headers, "X-Backend"), *ex.selected);
  }
  EXPECT_EQ(ids, (std::vector<std::string>{"node01", "node02", "node01", "node02", "node01",
                                           "node02"}));
}

TEST(Balancer, PersistedRequestsDoNotMoveTheCursor) {
  Balancer bal(pool_of(2));
  std::vector<std::string> rotation;
  for (int i = 0; i < 10; ++i) {
    auto sticky = bal.select(with_cookie("node01"));
    ASSERT_TRUE(sticky);
    EXPECT_EQ(sticky->backend_id, "node01");
    EXPECT_TRUE(sticky->persisted);
    rotation.push_back(bal.select(http::Request{})->backend_id);
  }
  for (std::size_t i = 0; i < rotation.size(); ++i)
    EXPECT_EQ(rotation[i], i % 2 ? "node02" : "node01");
}

TEST(Balancer, UnknownOrDownCookieFallsBackToRoundRobin) {
  Balancer bal(pool_of(2));
  auto d = bal.select(with_cookie("node07"));
  ASSERT_TRUE(d);
  EXPECT_FALSE(d->persisted);
  EXPECT_EQ(d->backend_id, "node01");
  bal.record_probe("node02", false);
  bal.record_probe("node02", false);
  auto e = bal.select(with_cookie("node02"));
  EXPECT_FALSE(e->persisted);
  EXPECT_EQ(e->backend_id, "node01");
}

TEST(Balancer, RandomInterleavingKeepsPersistence) {
  std::mt19937 rng(5);
  Balancer bal(pool_of(4));
  std::vector<std::string> cookie(8);
  for (int i = 0; i < 2000; ++i) {
    auto c = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 7)(rng));
    http::Request r;
    if (!cookie[c].empty()) r = with_cookie(cookie[c]);
    auto d = bal.select(r);
    ASSERT_TRUE(d);
    if (!cookie[c].empty()) EXPECT_EQ(d->backend_id, cookie[c]);
    cookie[c] = d->backend_id;
  }
}

TEST(Balancer, NoHealthyBackendGives503AndCountsRejections) {
  Balancer bal(pool_of(2));
  for (const auto* id : {"node01", "node02"}) {
    bal.record_probe(id, false);
    bal.record_probe(id, false);
  }
  auto upstream = [](const Backend&, const http::Request&) {
    return std::optional<http::Response>(http::make_response(200));
  };
  for (int i = 0; i < 7; ++i) {
    auto ex = bal.route(http::Request{}, upstream);
    EXPECT_EQ(ex.response.status, 503);
    EXPECT_TRUE(ex.response.body.empty());
  }
  auto stats = bal.snapshot_stats();
  EXPECT_EQ(stats.rejected, 7u);
  EXPECT_EQ(stats.errors, 7u);
}

TEST(Balancer, UpstreamFailureRetriesOnceThen502) {
  Balancer bal(pool_of(2));
  int calls = 0;
  auto node01_dead = [&](const Backend& b, const http::Request&) -> std::optional<http::Response> {
    ++calls;
    if (b.id == "node01") return std::nullopt;
    return http::make_response(200);
  };
  auto ex = bal.route(http::Request{}, node01_dead);
  EXPECT_EQ(ex.response.status, 200);
  EXPECT_EQ(ex.selected, "node02");
  EXPECT_EQ(calls, 2);

  auto all_dead = [&](const Backend&, const http::Request&) -> std::optional<http::Response> {
    return std::nullopt;
  };
  auto bad = bal.route(http::Request{}, all_dead);
  EXPECT_EQ(bad.response.status, 502);
  EXPECT_FALSE(bad.selected);
}

TEST(Balancer, HundredRequestsSplitEvenly) {
  Balancer bal(pool_of(2));
  EXPECT_EQ(bal.snapshot_stats().backends[0].requests, 0u);
  auto upstream = [](const Backend&, const http::Request&) {
    return std::optional<http::Response>(http::make_response(200));
  };
  for (int i = 0; i < 100; ++i) bal.route(http::Request{}, upstream);
  auto s = bal.snapshot_stats();
  EXPECT_EQ(s.backends[0].requests, 50u);
  EXPECT_EQ(s.backends[1].requests, 50u);
}
