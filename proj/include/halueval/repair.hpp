#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace halueval::gateway {
class Gateway;
}

namespace halueval::repair {

struct DetectorVerdict {
    std::vector<std::string> spans;  // non-empty strings, source order
    bool operator==(const DetectorVerdict&) const = default;
};

enum class RepairMethod { strict, syntactic, typed_extraction, prose_extraction, needs_llm };

std::string to_string(RepairMethod m);

struct RepairOptions {
    // lowercase substrings that map free prose to an empty verdict
    std::vector<std::string> no_hallucination_phrases = {
        "no hallucinations",
        "no hallucination",
        "not hallucinated",
        "the answer is supported",
        "fully supported",
        "is faithful to the context",
    };
};

struct RepairOutcome {
    std::optional<DetectorVerdict> verdict;  // absent iff method == needs_llm
    RepairMethod method = RepairMethod::needs_llm;
    std::vector<std::string> trace;
};

/// Accepts only a well-formed JSON object whose "hallucination_list" key
/// maps to an array of strings.
std::optional<DetectorVerdict> parse_strict(std::string_view text);

/// Text-level JSON fixes, applied in fixed order: drop prose around the
/// JSON payload, insert missing commas between adjacent array items, quote
/// bare keys and bare scalar values, remove trailing commas, close unclosed
/// brackets at end of input. Returns the input unchanged when no JSON-like
/// payload is present.
std::string repair_syntactic(std::string_view text);

/// Structural extraction from parseable JSON that deviates from the strict
/// schema: object items carrying a "span" key, a single-key object wrapping
/// the list, or a bare top-level array.
std::optional<DetectorVerdict> extract_typed(std::string_view text,
                                             std::vector<std::string>& trace);

/// List recovery from plain prose: numbered lists, bullet lists, items
/// after a hallucination header, bare line-separated items.
std::optional<DetectorVerdict> extract_prose(std::string_view text, const RepairOptions& options,
                                             std::vector<std::string>& trace);

/// Deterministic pipeline: strict -> syntactic -> typed -> prose; first
/// success wins. needs_llm is the escalation signal, not an error.
RepairOutcome repair(std::string_view text, const RepairOptions& options = {});

struct UnrepairableOutput {
    std::string message;
    std::string last_reply;
};

/// One LLM escalation round: render the repair prompt, call the gateway,
/// strict-parse the reply.
std::variant<DetectorVerdict, UnrepairableOutput> repair_with_llm(std::string_view text,
                                                                  gateway::Gateway& gw,
                                                                  const std::string& model);

/// Canonical wire form: {"hallucination_list": ["a", "b"]}
std::string serialize(const DetectorVerdict& verdict);

}  // namespace halueval::repair
