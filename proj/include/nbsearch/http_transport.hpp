#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace nbsearch {

struct HttpResponse {
  int status = 0;  // 0: no response (connection failure, timeout)
  std::string body;
  std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url, const HttpHeaders& headers, const std::string& body) = 0;
};

/// Blocking client for http:// URLs, and https:// when built with OpenSSL.
std::shared_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(60));

}  // namespace nbsearch
