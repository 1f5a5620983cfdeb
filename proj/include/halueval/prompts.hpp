#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace halueval::corpus {
struct QASample;
}

namespace halueval::prompts {

inline constexpr const char* kTemplateVersion = "templates-v1";

struct PromptText {
    std::optional<std::string> system;
    std::string user;
};

enum class ReplySchema { verification, hallucination };

struct StructuredReply {
    // keys are lowercase schema field names; is_hallucinated stored as
    // canonical "true"/"false"
    std::map<std::string, std::string> fields;
    std::string raw;

    bool is_hallucinated() const { return fields.at("is_hallucinated") == "true"; }
};

struct ReplyError {
    enum class Kind { missing_field, field_format };
    Kind kind;
    std::string field;
    std::string message() const;
};

using ParseResult = std::variant<StructuredReply, ReplyError>;

/// Concatenated paragraph texts in input order, titles prefixed, blank line
/// between paragraphs. Shared by prompt rendering and token statistics.
std::string evidence_text(const corpus::QASample& sample);

PromptText render_verification(const corpus::QASample& sample, const std::string& claimed_answer,
                               bool claimed_truth);
PromptText render_hallucination(const corpus::QASample& sample);
PromptText render_detection(const std::string& context, const std::string& question,
                            const std::string& answer);
PromptText render_json_fix(const std::string& raw_output);

/// Extract "key: value" lines. Keys are matched case-insensitively and may
/// carry markdown bolding unless exact=true; reasoning continues across
/// lines until the next known key.
ParseResult parse_reply(std::string_view text, ReplySchema schema, bool exact = false);

/// Inverse of parse_reply on the documented schema (round-trip helper).
std::string format_reply(const std::map<std::string, std::string>& fields, ReplySchema schema);

}  // namespace halueval::prompts
