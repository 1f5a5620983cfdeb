#pragma once

#include <deque>
#include <functional>
#include <mutex>
#include <vector>

#include "halueval/gateway.hpp"

namespace halueval::gateway {

/// Deterministic in-process gateway for tests and replay-free runs. Replies
/// come from an injected handler or a FIFO script; every call is logged and
/// the concurrent in-flight high-water mark is tracked.
class ScriptedGateway : public Gateway {
public:
    using Handler = std::function<ChatResult(const ChatRequest&)>;

    ScriptedGateway() = default;
    explicit ScriptedGateway(Handler handler) : handler_(std::move(handler)) {}

    void set_handler(Handler handler) { handler_ = std::move(handler); }

    void push_reply(std::string content, long completion_tokens = 0, double latency_s = 0.001);
    void push_error(GatewayError::Kind kind, std::string message = {});

    ChatResult complete(const ChatRequest& request) override;

    size_t call_count() const;
    std::vector<ChatRequest> calls() const;
    int high_water() const;

private:
    Handler handler_;
    std::deque<ChatResult> script_;
    mutable std::mutex mutex_;
    std::vector<ChatRequest> calls_;
    int in_flight_ = 0;
    int high_water_ = 0;
};

}  // namespace halueval::gateway
