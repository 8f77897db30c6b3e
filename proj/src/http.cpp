#include "hacluster/http.hpp"

#include <algorithm>
#include <charconv>

#include "hacluster/common.hpp"

namespace hacluster::http {

std::optional<std::string> find_header(const Headers& headers, std::string_view name) {
  for (const auto& [k, v] : headers)
    if (iequals(k, name)) return v;
  return std::nullopt;
}

std::size_t count_header(const Headers& headers, std::string_view name) {
  return static_cast<std::size_t>(std::count_if(
      headers.begin(), headers.end(), [&](const auto& h) { return iequals(h.first, name); }));
}

void set_header(Headers& headers, std::string name, std::string value) {
  for (auto& [k, v] : headers) {
    if (iequals(k, name)) {
      v = std::move(value);
      return;
    }
  }
  headers.emplace_back(std::move(name), std::move(value));
}

void remove_header_if(Headers& headers, std::string_view name,
                      bool (*pred)(std::string_view value)) {
  std::erase_if(headers, [&](const auto& h) { return iequals(h.first, name) && pred(h.second); });
}

std::optional<std::string> Request::cookie(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (!iequals(k, "Cookie")) continue;
    std::string_view rest = v;
    while (!rest.empty()) {
      auto semi = rest.find(';');
      std::string_view pair = trim(rest.substr(0, semi));
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
      auto eq = pair.find('=');
      if (eq == std::string_view::npos) continue;
      if (trim(pair.substr(0, eq)) == name) return std::string(trim(pair.substr(eq + 1)));
    }
  }
  return std::nullopt;
}

std::string reason_phrase(int status) {
  switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 502: return "Bad Gateway";
    case 503: return "Service Unavailable";
    default: return "Unknown";
  }
}

namespace {

void append_headers(std::string& out, const Headers& headers) {
  for (const auto& [k, v] : headers) {
    out += k;
    out += ": ";
    out += v;
    out += "\r\n";
  }
}

// Splits "head\r\n\r\nbody"; returns header lines (first is the start line) and body.
std::optional<std::pair<std::vector<std::string_view>, std::string_view>> split_message(
    std::string_view raw) {
  auto end = raw.find("\r\n\r\n");
  if (end == std::string_view::npos) return std::nullopt;
  std::string_view head = raw.substr(0, end);
  std::vector<std::string_view> lines;
  while (!head.empty()) {
    auto nl = head.find("\r\n");
    lines.push_back(head.substr(0, nl));
    head = nl == std::string_view::npos ? std::string_view{} : head.substr(nl + 2);
  }
  if (lines.empty()) return std::nullopt;
  return std::make_pair(std::move(lines), raw.substr(end + 4));
}

std::optional<Headers> parse_headers(const std::vector<std::string_view>& lines) {
  Headers headers;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto colon = lines[i].find(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    headers.emplace_back(std::string(lines[i].substr(0, colon)),
                         std::string(trim(lines[i].substr(colon + 1))));
  }
  return headers;
}

std::optional<std::size_t> content_length(const Headers& headers) {
  auto v = find_header(headers, "Content-Length");
  if (!v) return std::nullopt;
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
  if (ec != std::errc{} || ptr != v->data() + v->size()) return std::nullopt;
  return n;
}

}  // namespace

std::string serialize(const Request& req) {
  std::string out = req.method + " " + req.path + " HTTP/1.1\r\n";
  Headers headers = req.headers;
  if (!req.body.empty() || req.method == "POST")
    set_header(headers, "Content-Length", std::to_string(req.body.size()));
  set_header(headers, "Connection", "close");
  append_headers(out, headers);
  out += "\r\n";
  out += req.body;
  return out;
}

std::string serialize(const Response& resp) {
  std::string out =
      "HTTP/1.1 " + std::to_string(resp.status) + " " + resp.reason + "\r\n";
  append_headers(out, resp.headers);
  out += "\r\n";
  if (!resp.head_only) out += resp.body;
  return out;
}

std::optional<Request> parse_request(std::string_view raw) {
  auto parts = split_message(raw);
  if (!parts) return std::nullopt;
  auto& [lines, body] = *parts;
  auto start = split_words(lines[0]);
  if (start.size() != 3 || !start[2].starts_with("HTTP/1.")) return std::nullopt;
  auto headers = parse_headers(lines);
  if (!headers) return std::nullopt;
  Request req;
  req.method = start[0];
  req.path = start[1];
  req.headers = std::move(*headers);
  auto len = content_length(req.headers);
  if (len) {
    if (body.size() < *len) return std::nullopt;
    req.body = std::string(body.substr(0, *len));
  }
  return req;
}

std::optional<Response> parse_response(std::string_view raw, bool head_request) {
  auto parts = split_message(raw);
  if (!parts) return std::nullopt;
  auto& [lines, body] = *parts;
  std::string_view start = lines[0];
  if (!start.starts_with("HTTP/1.")) return std::nullopt;
  auto sp1 = start.find(' ');
  if (sp1 == std::string_view::npos) return std::nullopt;
  auto rest = start.substr(sp1 + 1);
  auto sp2 = rest.find(' ');
  std::string_view code = rest.substr(0, sp2);
  Response resp;
  auto [ptr, ec] = std::from_chars(code.data(), code.data() + code.size(), resp.status);
  if (ec != std::errc{} || ptr != code.data() + code.size()) return std::nullopt;
  resp.reason = sp2 == std::string_view::npos ? "" : std::string(rest.substr(sp2 + 1));
  auto headers = parse_headers(lines);
  if (!headers) return std::nullopt;
  resp.headers = std::move(*headers);
  resp.head_only = head_request;
  if (!head_request) {
    auto len = content_length(resp.headers);
    if (len) {
      if (body.size() < *len) return std::nullopt;
      resp.body = std::string(body.substr(0, *len));
    } else {
      resp.body = std::string(body);
    }
  }
  return resp;
}

Response make_response(int status, std::string body) {
  Response r;
  r.status = status;
  r.reason = reason_phrase(status);
  r.headers.emplace_back("Content-Length", std::to_string(body.size()));
  r.headers.emplace_back("Connection", "close");
  r.body = std::move(body);
  return r;
}

}  // namespace hacluster::http
