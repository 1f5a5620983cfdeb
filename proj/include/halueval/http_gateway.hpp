#pragma once

#include <string>

#include "halueval/gateway.hpp"

namespace halueval::gateway {

struct EndpointConfig {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string api_key;   // taken from the environment by the CLI
    int timeout_s = 60;
};

/// OpenAI-compatible chat-completions client (POST {base_url}/chat/completions).
class HttpGateway : public Gateway {
public:
    explicit HttpGateway(EndpointConfig config);
    ChatResult complete(const ChatRequest& request) override;

private:
    EndpointConfig config_;
    std::string host_;
    std::string path_prefix_;
};

}  // namespace halueval::gateway
