#pragma once

#include <string>
#include <utility>
#include <vector>

namespace elm::http {

struct Response {
    int status = 0;  // 0 when no HTTP response was received
    std::string body;
    std::string transport_error;
};

// POST a JSON body. Never throws for transport problems; inspect the result.
Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers, int timeout_ms);

// 429, 5xx and transport failures are worth retrying.
bool is_transient(const Response& r);

}  // namespace elm::http
