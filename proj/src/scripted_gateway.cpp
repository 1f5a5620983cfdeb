#include "halueval/scripted_gateway.hpp"

#include <stdexcept>

namespace halueval::gateway {

void ScriptedGateway::push_reply(std::string content, long completion_tokens, double latency_s) {
    ChatResponse r;
    r.content = std::move(content);
    r.completion_tokens = completion_tokens;
    r.latency = std::chrono::duration<double>(latency_s);
    std::lock_guard lock(mutex_);
    script_.push_back(ChatResult::success(std::move(r)));
}

void ScriptedGateway::push_error(GatewayError::Kind kind, std::string message) {
    GatewayError e;
    e.kind = kind;
    e.message = std::move(message);
    std::lock_guard lock(mutex_);
    script_.push_back(ChatResult::failure(std::move(e)));
}

ChatResult ScriptedGateway::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        calls_.push_back(request);
        ++in_flight_;
        if (in_flight_ > high_water_) high_water_ = in_flight_;
    }
    ChatResult result;
    if (handler_) {
        result = handler_(request);
    } else {
        std::lock_guard lock(mutex_);
        if (script_.empty()) {
            result = ChatResult::failure(
                {GatewayError::Kind::bad_request, "scripted gateway exhausted", 1});
        } else {
            result = std::move(script_.front());
            script_.pop_front();
        }
    }
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    return result;
}

size_t ScriptedGateway::call_count() const {
    std::lock_guard lock(mutex_);
    return calls_.size();
}

std::vector<ChatRequest> ScriptedGateway::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

int ScriptedGateway::high_water() const {
    std::lock_guard lock(mutex_);
    return high_water_;
}

}  // namespace halueval::gateway
