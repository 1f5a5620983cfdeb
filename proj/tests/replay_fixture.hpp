#pragma once

// Builders for replay files that satisfy the CLI's perturb and eval
// subcommands without a live endpoint.

#include <string>
#include <vector>

#include "halueval/corpus.hpp"
#include "halueval/gateway.hpp"
#include "halueval/prompts.hpp"
#include "halueval/replay_gateway.hpp"

namespace testutil {

inline halueval::gateway::ChatRequest generation_request(const std::string& model,
                                                         const std::string& user_prompt,
                                                         double temperature = 0.7) {
    halueval::gateway::ChatRequest req;
    req.model = model;
    req.temperature = temperature;
    req.max_output_tokens = 1024;
    req.messages.push_back({halueval::gateway::ChatMessage::Role::user, user_prompt});
    return req;
}

inline std::string replay_line(const halueval::gateway::ChatRequest& req,
                               const std::string& content) {
    halueval::gateway::ChatResponse resp;
    resp.content = content;
    resp.completion_tokens = 16;
    return halueval::gateway::ReplayGateway::format_entry(halueval::gateway::request_hash(req),
                                                          resp) +
           "\n";
}

/// Replay entries for both branches of every sample, repeated `copies` times
/// so repeated runs and re-asks never miss.
inline std::string perturb_replay(const std::vector<halueval::corpus::QASample>& samples,
                                  const std::string& model, int copies = 2) {
    namespace prompts = halueval::prompts;
    std::string out;
    for (const auto& s : samples) {
        if (!s.answerable) continue;
        auto verified = generation_request(model, prompts::render_verification(s, s.answer, true).user);
        auto perturbed = generation_request(model, prompts::render_hallucination(s).user);
        std::string verified_reply =
            "answer: " + s.answer + "\nreasoning: the evidence states this directly\n"
            "is_hallucinated: false";
        std::string perturbed_reply =
            "answer: " + s.answer + "\nhallucinated_answer: not " + s.answer +
            "\nreasoning: swapped the entity\nis_hallucinated: true";
        for (int i = 0; i < copies; ++i) {
            out += replay_line(verified, verified_reply);
            out += replay_line(perturbed, perturbed_reply);
        }
    }
    return out;
}

/// Replay entries answering each detection prompt with the gold verdict.
inline std::string eval_replay(const std::vector<halueval::corpus::RagTruthCase>& cases,
                               const std::string& model, int copies = 1) {
    namespace prompts = halueval::prompts;
    std::string out;
    for (const auto& c : cases) {
        auto req = generation_request(
            model, prompts::render_detection(c.context, c.question, c.response).user,
            /*temperature=*/0.0);
        std::string reply = c.hallucinated()
                                ? R"({"hallucination_list": ["flagged span"]})"
                                : R"({"hallucination_list": []})";
        for (int i = 0; i < copies; ++i) out += replay_line(req, reply);
    }
    return out;
}

}  // namespace testutil
