#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace halueval::gateway {

struct ChatMessage {
    enum class Role { system, user, assistant };
    Role role = Role::user;
    std::string content;
};

std::string to_string(ChatMessage::Role r);

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;  // [0, 2]
    int max_output_tokens = 1024;

    void validate() const;  // throws std::invalid_argument
};

struct ChatResponse {
    std::string content;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    std::chrono::duration<double> latency{0};
    int attempts = 1;
};

struct GatewayError {
    enum class Kind {
        timeout,          // retryable
        rate_limited,     // retryable
        server_error,     // retryable
        auth,             // not retryable
        bad_request,      // not retryable
        protocol,         // not retryable (malformed endpoint reply)
        transport_exhausted
    };
    Kind kind = Kind::protocol;
    std::string message;
    int attempts = 1;

    bool retryable() const {
        return kind == Kind::timeout || kind == Kind::rate_limited || kind == Kind::server_error;
    }
};

std::string to_string(GatewayError::Kind k);

struct ChatResult {
    std::optional<ChatResponse> response;
    std::optional<GatewayError> error;

    bool ok() const { return response.has_value(); }
    static ChatResult success(ChatResponse r) { return {std::move(r), std::nullopt}; }
    static ChatResult failure(GatewayError e) { return {std::nullopt, std::move(e)}; }
};

class Gateway {
public:
    virtual ~Gateway() = default;
    virtual ChatResult complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
    int budget = 3;  // total attempts
    double initial_backoff_s = 1.0;
    double factor = 2.0;
    uint64_t jitter_seed = 0;
    // Injectable for tests; defaults to a real sleep.
    std::function<void(double seconds)> sleeper;
};

/// Retries retryable failures with exponential backoff. Delays are jittered
/// within [d/2, d] of the exponential cap so the sequence stays
/// non-decreasing.
class RetryingGateway : public Gateway {
public:
    RetryingGateway(Gateway& inner, RetryPolicy policy);
    ChatResult complete(const ChatRequest& request) override;

private:
    Gateway& inner_;
    RetryPolicy policy_;
};

/// Fan out requests with at most max_in_flight outstanding at once; results
/// are aligned with input order. Per-request errors are positional.
std::vector<ChatResult> complete_many(Gateway& gw, const std::vector<ChatRequest>& requests,
                                      int max_in_flight);

struct RunSample {
    long completion_tokens = 0;
    double seconds = 0;
    bool ok = false;
};

struct ThroughputReport {
    long input_length = 0;
    int runs = 0;
    double tokens_per_second = 0;
    std::vector<RunSample> samples;
    int failures = 0;
    bool partial = false;
};

/// Issues `runs` fixed-budget completions over a prompt of roughly
/// input_length tokens and reports aggregate completion tokens per second of
/// generation time.
ThroughputReport throughput_probe(Gateway& gw, const std::string& model, long input_length,
                                  int runs, int max_output_tokens = 256);

/// Stable key for record/replay: model, temperature, and all messages.
std::string request_hash(const ChatRequest& request);

}  // namespace halueval::gateway
