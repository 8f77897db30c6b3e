#include <gtest/gtest.h>

#include "hacluster/http.hpp"

using namespace hacluster;

TEST(Http, RequestRoundTrip) {
  http::Request r;
  r.method = "POST";
  r.path = "/upload";
  r.headers.emplace_back("Host", "192.168.1.20");
  r.headers.emplace_back("Cookie", "a=1; SERVERID=node02");
  r.body = "hello";
  auto raw = http::serialize(r);
  EXPECT_NE(raw.find("Connection: close\r\n"), std::string::npos);
  auto back = http::parse_request(raw);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->method, "POST");
  EXPECT_EQ(back->path, "/upload");
  EXPECT_EQ(back->body, "hello");
  EXPECT_EQ(back->cookie("SERVERID"), "node02");
  EXPECT_EQ(back->cookie("a"), "1");
  EXPECT_FALSE(back->cookie("b"));
}

TEST(Http, HeadResponseKeepsLengthWithoutBody) {
  auto r = http::make_response(200, "0123456789");
  r.head_only = true;
  auto raw = http::serialize(r);
  EXPECT_TRUE(raw.ends_with("\r\n\r\n"));
  auto back = http::parse_response(raw, true);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->status, 200);
  EXPECT_EQ(http::find_header(back->headers, "Content-Length"), "10");
  EXPECT_TRUE(back->body.empty());
}

TEST(Http, ResponsePreservesHeaderOrderAndSpelling) {
  std::string raw =
      "HTTP/1.1 200 OK\r\nDate: Thu, 01 Jan 2026 00:00:00 GMT\r\nServer: Apache\r\n"
      "X-Powered-By: PHP/5.3.3\r\nContent-Length: 2\r\n\r\nhi";
  auto r = http::parse_response(raw);
  ASSERT_TRUE(r);
  ASSERT_EQ(r->headers.size(), 4u);
  EXPECT_EQ(r->headers[2].first, "X-Powered-By");
  EXPECT_EQ(r->body, "hi");
  EXPECT_EQ(http::serialize(*r), raw);
}

TEST(Http, MalformedInputIsRejected) {
  EXPECT_FALSE(http::parse_request("GET /\r\n\r\n"));
  EXPECT_FALSE(http::parse_request("GET / HTTP/1.1\r\nBroken\r\n\r\n"));
  EXPECT_FALSE(http::parse_response("HTTP/1.1 abc OK\r\n\r\n"));
  EXPECT_FALSE(http::parse_response("HTTP/1.1 200 OK\r\nContent-Length: 9\r\n\r\nshort"));
}

TEST(Http, HeaderHelpersAreCaseInsensitive) {
  http::Headers h{{"set-cookie", "SERVERID=x"}, {"Set-Cookie", "b=2"}};
  EXPECT_EQ(http::count_header(h, "Set-Cookie"), 2u);
  http::set_header(h, "content-length", "3");
  http::set_header(h, "Content-Length", "4");
  EXPECT_EQ(http::count_header(h, "Content-Length"), 1u);
  EXPECT_EQ(http::find_header(h, "CONTENT-LENGTH"), "4");
  EXPECT_EQ(http::reason_phrase(503), "Service Unavailable");
}
