#include <httplib.h>

#include "venus/http.hpp"

#include <cctype>
#include <cmath>

#include "venus/error.hpp"

namespace venus::http {

Url parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw ConfigError("URL without scheme: \"" + std::string(url) + "\"");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported URL scheme \"" + std::string(scheme) + "\"");
  }
  const auto host_begin = scheme_end + 3;
  auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string_view::npos) path_begin = url.size();
  if (path_begin == host_begin) throw ConfigError("URL without host: \"" + std::string(url) + "\"");
  Url out{std::string(url.substr(0, path_begin)), std::string(url.substr(path_begin))};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

namespace {

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  }
  return true;
}

void set_timeouts(httplib::Client& client, double timeout_s) {
  const auto sec = static_cast<time_t>(timeout_s);
  const auto usec = static_cast<time_t>(std::llround((timeout_s - static_cast<double>(sec)) * 1e6));
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
}

Response convert(const httplib::Result& res) {
  if (!res) return {0, {}, httplib::to_string(res.error())};
  return {res->status, res->body, {}};
}

class HttplibTransport final : public Transport {
 public:
  Response post(const std::string& url, const std::string& body, const Headers& headers, double timeout_s) override {
    const auto u = parse_url(url);
    httplib::Client client(u.origin);
    set_timeouts(client, timeout_s);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (iequals(k, "content-type")) {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    return convert(client.Post(u.path.empty() ? "/" : u.path, h, body, content_type));
  }

  Response get(const std::string& url, double timeout_s) override {
    const auto u = parse_url(url);
    httplib::Client client(u.origin);
    set_timeouts(client, timeout_s);
    return convert(client.Get(u.path.empty() ? "/" : u.path));
  }
};

}  // namespace

std::shared_ptr<Transport> default_transport() {
  static const auto transport = std::make_shared<HttplibTransport>();
  return transport;
}

}  // namespace venus::http
