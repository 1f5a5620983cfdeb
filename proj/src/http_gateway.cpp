#include "halueval/http_gateway.hpp"

#include <chrono>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace halueval::gateway {

using nlohmann::json;

HttpGateway::HttpGateway(EndpointConfig config) : config_(std::move(config)) {
    // split scheme://host[:port] from the path prefix
    auto url = config_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint base_url needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = url;
    } else {
        host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

ChatResult HttpGateway::complete(const ChatRequest& request) {
    try {
        request.validate();
    } catch (const std::exception& e) {
        return ChatResult::failure({GatewayError::Kind::bad_request, e.what(), 1});
    }

    json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    body["messages"] = json::array();
    for (const auto& m : request.messages)
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});

    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout_s);
    client.set_read_timeout(config_.timeout_s);
    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);

    if (!res)
        return ChatResult::failure({GatewayError::Kind::timeout,
                                    "transport: " + httplib::to_string(res.error()), 1});
    if (res->status == 401 || res->status == 403)
        return ChatResult::failure({GatewayError::Kind::auth, res->body, 1});
    if (res->status == 429)
        return ChatResult::failure({GatewayError::Kind::rate_limited, res->body, 1});
    if (res->status >= 500)
        return ChatResult::failure({GatewayError::Kind::server_error, res->body, 1});
    if (res->status != 200)
        return ChatResult::failure({GatewayError::Kind::bad_request,
                                    "status " + std::to_string(res->status) + ": " + res->body,
                                    1});
    try {
        auto j = json::parse(res->body);
        ChatResponse out;
        out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            out.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
            out.completion_tokens = j["usage"].value("completion_tokens", 0L);
        }
        out.latency = elapsed;
        return ChatResult::success(std::move(out));
    } catch (const std::exception& e) {
        return ChatResult::failure(
            {GatewayError::Kind::protocol, std::string("malformed reply: ") + e.what(), 1});
    }
}

}  // namespace halueval::gateway
