#pragma once

#include <httplib.h>

#include <functional>
#include <string>
#include <thread>

namespace elm::testing {

// Local HTTP server on an ephemeral port, stopped on destruction.
class MockServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    MockServer(const std::string& path, Handler handler) {
        server_.Post(path, std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace elm::testing
