#include "halueval/replay_gateway.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "halueval/hash.hpp"

namespace halueval::gateway {

using nlohmann::json;

void AuditLog::append(const ChatRequest& request, const ChatResult& result) {
    nlohmann::ordered_json j;
    j["hash"] = request_hash(request);
    j["timestamp"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    if (result.ok()) {
        j["latency_s"] = result.response->latency.count();
        j["prompt_tokens"] = result.response->prompt_tokens;
        j["completion_tokens"] = result.response->completion_tokens;
        j["content"] = result.response->content.substr(0, 120);
    } else {
        j["error"] = to_string(result.error->kind);
    }
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << j.dump() << "\n";
}

std::string ReplayGateway::format_entry(const std::string& hash, const ChatResponse& response) {
    nlohmann::ordered_json j;
    j["hash"] = hash;
    j["content"] = response.content;
    j["prompt_tokens"] = response.prompt_tokens;
    j["completion_tokens"] = response.completion_tokens;
    j["latency_s"] = response.latency.count();
    return j.dump();
}

ReplayGateway::ReplayGateway(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open replay file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line, nullptr, true);
        ChatResponse r;
        r.content = j.at("content").get<std::string>();
        r.prompt_tokens = j.value("prompt_tokens", 0L);
        r.completion_tokens = j.value("completion_tokens", 0L);
        r.latency = std::chrono::duration<double>(j.value("latency_s", 0.001));
        entries_[j.at("hash").get<std::string>()].push_back(std::move(r));
    }
}

ChatResult ReplayGateway::complete(const ChatRequest& request) {
    auto hash = request_hash(request);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(hash);
    if (it == entries_.end() || it->second.empty())
        return ChatResult::failure(
            {GatewayError::Kind::bad_request, "no replay entry for request " + hash, 1});
    ChatResponse r = std::move(it->second.front());
    it->second.pop_front();
    return ChatResult::success(std::move(r));
}

ChatResult RecordingGateway::complete(const ChatRequest& request) {
    auto result = inner_.complete(request);
    if (result.ok()) {
        std::lock_guard lock(mutex_);
        std::ofstream out(replay_path_, std::ios::app | std::ios::binary);
        out << ReplayGateway::format_entry(request_hash(request), *result.response) << "\n";
    }
    if (audit_) audit_->append(request, result);
    return result;
}

}  // namespace halueval::gateway
