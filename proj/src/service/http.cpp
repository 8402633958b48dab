#include <fmt/format.h>

#include "echoflag/error.hpp"
#include "echoflag/service/review.hpp"
#include "httplib.h"

namespace echoflag::service {

struct HttpFrontend::Impl {
  httplib::Server server;
};

HttpFrontend::HttpFrontend(ReviewService& svc) : impl_(std::make_unique<Impl>()) {
  const auto route = [&svc](const httplib::Request& req, httplib::Response& res) {
    Query q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    const auto r = svc.handle(req.method, req.path, q, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(R"(/surveys(/.*)?)", route);
  impl_->server.Post(R"(/surveys(/.*)?)", route);
}

HttpFrontend::~HttpFrontend() = default;

int HttpFrontend::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : impl_->server.bind_to_port(host, port) ? port : -1;
  if (bound < 0) throw Error(ErrorCode::Io, fmt::format("cannot listen on {}:{}", host, port));
  return bound;
}

void HttpFrontend::run() {
  if (!impl_->server.listen_after_bind()) throw Error(ErrorCode::Io, "HTTP server stopped with an error");
}

void HttpFrontend::stop() { impl_->server.stop(); }

void serve(ReviewService& svc, const std::string& host, int port) {
  HttpFrontend http(svc);
  http.bind(host, port);
  http.run();
}

}  // namespace echoflag::service
