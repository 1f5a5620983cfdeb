#pragma once

#include <deque>
#include <mutex>
#include <string>
#include <unordered_map>

#include "halueval/gateway.hpp"

namespace halueval::gateway {

/// Append-only audit log of gateway traffic: one line per exchange with the
/// request hash, timestamp, latency, token counts, and truncated content.
class AuditLog {
public:
    explicit AuditLog(std::string path) : path_(std::move(path)) {}
    void append(const ChatRequest& request, const ChatResult& result);

private:
    std::string path_;
    std::mutex mutex_;
};

/// Replays responses from a record file keyed by request hash; identical
/// requests consume entries FIFO. A missing entry is a non-retryable error
/// so deterministic runs fail loudly instead of hitting the network.
class ReplayGateway : public Gateway {
public:
    explicit ReplayGateway(const std::string& path);
    ChatResult complete(const ChatRequest& request) override;

    /// Serialize one exchange in the replay-file format (also usable by
    /// tests to script replies).
    static std::string format_entry(const std::string& hash, const ChatResponse& response);

private:
    std::unordered_map<std::string, std::deque<ChatResponse>> entries_;
    std::mutex mutex_;
};

/// Pass-through gateway that appends every successful exchange to a replay
/// file (and optionally an audit log) for later deterministic re-runs.
class RecordingGateway : public Gateway {
public:
    RecordingGateway(Gateway& inner, std::string replay_path, AuditLog* audit = nullptr)
        : inner_(inner), replay_path_(std::move(replay_path)), audit_(audit) {}
    ChatResult complete(const ChatRequest& request) override;

private:
    Gateway& inner_;
    std::string replay_path_;
    AuditLog* audit_;
    std::mutex mutex_;
};

}  // namespace halueval::gateway
