// All cpp-httplib usage lives in this translation unit.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "vulninstruct/cot_sv.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/mock_endpoint.hpp"
#include "vulninstruct/model_client.hpp"

namespace vulninstruct {

HttpTransport::HttpTransport(std::string base_url, int timeout_ms) : timeout_ms_(timeout_ms) {
    auto scheme = base_url.find("://");
    if (scheme == std::string::npos) throw ConfigError("base_url needs a scheme: " + base_url);
    auto slash = base_url.find('/', scheme + 3);
    origin_ = base_url.substr(0, slash);
    prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpResponse HttpTransport::post(const HttpRequest& request) {
    httplib::Client cli(origin_);
    const auto secs = timeout_ms_ / 1000;
    const auto usecs = (timeout_ms_ % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
        if (k == "Content-Type") content_type = v;
        else headers.emplace(k, v);
    }
    auto res = cli.Post(prefix_ + request.path, headers, request.body, content_type);
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
}

struct MockServer::Impl {
    httplib::Server server;
};

MockServer::MockServer(std::shared_ptr<ScriptedResponder> responder, std::string prefix, std::string required_token)
    : impl_(std::make_unique<Impl>()), prefix_(std::move(prefix)) {
    impl_->server.Post(prefix_ + "/chat/completions",
                       [responder, token = std::move(required_token)](const httplib::Request& req, httplib::Response& res) {
                           if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
                               res.status = 401;
                               res.set_content(R"({"error":"unauthorized"})", "application/json");
                               return;
                           }
                           HttpResponse out = responder->handle(req.body);
                           res.status = out.status;
                           res.set_content(out.body, "application/json");
                       });
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error("mock server could not bind a port");
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + prefix_; }

HttpResponse http_get(const std::string& url, int timeout_ms) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("url needs a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    httplib::Client cli(url.substr(0, slash));
    cli.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    cli.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    auto res = cli.Get(slash == std::string::npos ? "/" : url.substr(slash));
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
}

} // namespace vulninstruct
