#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hacluster::http {

// Ordered header list; order and spelling are preserved for pass-through.
using Headers = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> find_header(const Headers& headers, std::string_view name);
std::size_t count_header(const Headers& headers, std::string_view name);
void set_header(Headers& headers, std::string name, std::string value);
void remove_header_if(Headers& headers, std::string_view name,
                      bool (*pred)(std::string_view value));

struct Request {
  std::string method = "GET";
  std::string path = "/";
  Headers headers;
  std::string body;

  /// Value of cookie `name` from any Cookie header.
  std::optional<std::string> cookie(std::string_view name) const;
};

struct Response {
  int status = 200;
  std::string reason = "OK";
  Headers headers;
  std::string body;
  // HEAD responses advertise the entity length without carrying the body.
  bool head_only = false;
};

std::string reason_phrase(int status);

/// HTTP/1.1 serialization; every exchange is `Connection: close`.
std::string serialize(const Request& req);
std::string serialize(const Response& resp);

std::optional<Request> parse_request(std::string_view raw);
std::optional<Response> parse_response(std::string_view raw, bool head_request = false);

Response make_response(int status, std::string body = {});

}  // namespace hacluster::http
