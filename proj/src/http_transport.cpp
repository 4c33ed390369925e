#include "nbsearch/http_transport.hpp"

#include <httplib.h>

namespace nbsearch {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_begin);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResponse post_json(const std::string& url, const HttpHeaders& headers, const std::string& body) override {
    const SplitUrl parts = split_url(url);
    HttpResponse out;
    try {
      httplib::Client client(parts.origin);
      if (!client.is_valid()) {
        out.error = "unsupported endpoint " + parts.origin;
        return out;
      }
      client.set_connection_timeout(timeout_);
      client.set_read_timeout(timeout_);
      client.set_write_timeout(timeout_);
      httplib::Headers hdrs;
      for (const auto& [k, v] : headers) hdrs.emplace(k, v);
      auto res = client.Post(parts.path, hdrs, body, "application/json");
      if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
      }
      out.status = res->status;
      out.body = res->body;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  }

 private:
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout) {
  return std::make_shared<HttplibTransport>(timeout);
}

}  // namespace nbsearch
