#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace venus::http {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Response {
  /// 0 when the request never produced an HTTP status (connect failure,
  /// timeout); `error` then says why.
  int status = 0;
  std::string body;
  std::string error;
};

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash; may be empty
};

/// Accepts http:// and https:// URLs. Throws ConfigError otherwise.
Url parse_url(std::string_view url);

/// Minimal client interface so retry logic and protocol handling can be
/// exercised without sockets.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Response post(const std::string& url, const std::string& body, const Headers& headers,
                        double timeout_s) = 0;
  virtual Response get(const std::string& url, double timeout_s) = 0;
};

/// Blocking cpp-httplib client. Safe to share between threads: each call
/// opens its own connection.
std::shared_ptr<Transport> default_transport();

}  // namespace venus::http
