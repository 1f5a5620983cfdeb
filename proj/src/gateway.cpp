#include "halueval/gateway.hpp"

#include <atomic>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "halueval/hash.hpp"

namespace halueval::gateway {

std::string to_string(ChatMessage::Role r) {
    switch (r) {
        case ChatMessage::Role::system: return "system";
        case ChatMessage::Role::user: return "user";
        case ChatMessage::Role::assistant: return "assistant";
    }
    return "user";
}

std::string to_string(GatewayError::Kind k) {
    switch (k) {
        case GatewayError::Kind::timeout: return "timeout";
        case GatewayError::Kind::rate_limited: return "rate_limited";
        case GatewayError::Kind::server_error: return "server_error";
        case GatewayError::Kind::auth: return "auth";
        case GatewayError::Kind::bad_request: return "bad_request";
        case GatewayError::Kind::protocol: return "protocol";
        case GatewayError::Kind::transport_exhausted: return "transport_exhausted";
    }
    return "protocol";
}

void ChatRequest::validate() const {
    if (model.empty()) throw std::invalid_argument("empty model name");
    if (temperature < 0.0 || temperature > 2.0)
        throw std::invalid_argument("temperature out of [0, 2]");
    if (max_output_tokens <= 0) throw std::invalid_argument("max_output_tokens must be > 0");
    bool has_user = false;
    for (const auto& m : messages)
        if (m.role == ChatMessage::Role::user) has_user = true;
    if (!has_user) throw std::invalid_argument("request needs at least one user message");
}

std::string request_hash(const ChatRequest& request) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6g", request.temperature);
    uint64_t h = fnv1a64(request.model);
    h = fnv1a64(temp, h);
    h = fnv1a64("\x1f", h);
    for (const auto& m : request.messages) {
        h = fnv1a64(to_string(m.role), h);
        h = fnv1a64("\x1e", h);
        h = fnv1a64(m.content, h);
        h = fnv1a64("\x1f", h);
    }
    return to_hex(h);
}

RetryingGateway::RetryingGateway(Gateway& inner, RetryPolicy policy)
    : inner_(inner), policy_(std::move(policy)) {
    if (policy_.budget < 1) throw std::invalid_argument("retry budget must be >= 1");
    if (!policy_.sleeper)
        policy_.sleeper = [](double s) {
            std::this_thread::sleep_for(std::chrono::duration<double>(s));
        };
}

ChatResult RetryingGateway::complete(const ChatRequest& request) {
    std::mt19937_64 rng(policy_.jitter_seed ? policy_.jitter_seed : std::random_device{}());
    GatewayError last{};
    for (int attempt = 1; attempt <= policy_.budget; ++attempt) {
        auto result = inner_.complete(request);
        if (result.ok()) {
            result.response->attempts = attempt;
            return result;
        }
        last = *result.error;
        if (!last.retryable()) {
            last.attempts = attempt;
            return ChatResult::failure(last);
        }
        if (attempt < policy_.budget) {
            double cap = policy_.initial_backoff_s;
            for (int i = 1; i < attempt; ++i) cap *= policy_.factor;
            std::uniform_real_distribution<double> jitter(cap / 2.0, cap);
            policy_.sleeper(jitter(rng));
        }
    }
    GatewayError exhausted;
    exhausted.kind = GatewayError::Kind::transport_exhausted;
    exhausted.message = "retry budget exhausted; last: " + to_string(last.kind) +
                        (last.message.empty() ? "" : " (" + last.message + ")");
    exhausted.attempts = policy_.budget;
    return ChatResult::failure(exhausted);
}

std::vector<ChatResult> complete_many(Gateway& gw, const std::vector<ChatRequest>& requests,
                                      int max_in_flight) {
    if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    std::vector<ChatResult> results(requests.size());
    if (requests.empty()) return results;

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            results[i] = gw.complete(requests[i]);
        }
    };
    size_t n_threads = std::min<size_t>(static_cast<size_t>(max_in_flight), requests.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return results;
}

ThroughputReport throughput_probe(Gateway& gw, const std::string& model, long input_length,
                                  int runs, int max_output_tokens) {
    if (runs < 1) throw std::invalid_argument("runs must be >= 1");
    ThroughputReport report;
    report.input_length = input_length;
    report.runs = runs;

    std::string prompt;
    prompt.reserve(static_cast<size_t>(input_length) * 4);
    for (long i = 0; i < input_length; ++i) prompt += "tok ";

    ChatRequest req;
    req.model = model;
    req.temperature = 0.0;
    req.max_output_tokens = max_output_tokens;
    req.messages.push_back({ChatMessage::Role::user, prompt});

    double total_tokens = 0, total_seconds = 0;
    for (int r = 0; r < runs; ++r) {
        auto result = gw.complete(req);
        RunSample sample;
        if (result.ok()) {
            sample.ok = true;
            sample.completion_tokens = result.response->completion_tokens;
            sample.seconds = result.response->latency.count();
            total_tokens += sample.completion_tokens;
            total_seconds += sample.seconds;
        } else {
            ++report.failures;
        }
        report.samples.push_back(sample);
    }
    report.partial = report.failures > 0;
    report.tokens_per_second = total_seconds > 0 ? total_tokens / total_seconds : 0.0;
    return report;
}

}  // namespace halueval::gateway
