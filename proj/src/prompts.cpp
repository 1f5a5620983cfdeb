#include "halueval/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <vector>

#include "halueval/corpus.hpp"

namespace halueval::prompts {

namespace {

constexpr const char* kVerificationTemplate =
    R"(Given the question, evidence text, and an answer along with the truth value of the answer, you must give reasoning for why the truth value of the answer is correct. If the truth value of the answer is true, you must explain why the truth value of the answer is correct and cite the evidence text to support your answer. Otherwise, you must explain why the truth value of the answer is incorrect and, if possible, explain what the correct answer may be with citation.

Question: {question}

Evidence Text: {evidence_text}

Answer: {answer}

Format the output as:
answer: <answer>
reasoning: <brief description of why the truth value is correct>
is_hallucinated: <truth value of the answer>)";

constexpr const char* kHallucinationTemplate =
    R"(Given the question, evidence text, and gold answer, generate a perturbed answer that is not supported by the evidence text. However, the perturbed answer may be in the evidence text, but not as the answer to the question. The difference between the perturbed answer and the gold answer should be subtle. No matter what, the perturbed answer should be different from the gold answer.

Question: {question}

Evidence Text: {evidence_text}

Gold Answer: {answer}

Format the output as:
answer: <gold answer>
hallucinated_answer: <perturbed answer>
reasoning: <brief description of what was changed>
is_hallucinated: true)";

constexpr const char* kJsonFixTemplate =
    R"PROMPT(You are a JSON repair tool. Output only valid JSON, no explanations.
Common errors you fix:

1. Missing commas between array items: ["item1" "item2"] → ["item1", "item2"]

2. Unclosed brackets: {"list": [{"item": "value"} → {"list": [{"item": "value"}]}

3. Missing quotes: {list: [value]} → {"list": ["value"]}

4. Trailing commas: ["item1", "item2",] → ["item1", "item2"]

5. Unstructured lists:
"Hallucinations:
1. First item 2. Second item"
→ {"hallucination_list": ["First item", "Second item"]}

6. Bullet points: • First item • Second item → {"hallucination_list": ["First item", "Second item"]}

7. Numbered lists: "1) First item 2) Second item" → {"hallucination_list": ["First item", "Second item"]}

8. Line-separated items: "First item \n Second item" → {"hallucination_list": ["First item", "Second item"]}

If you see a plain text response with phrases like "I found these hallucinations:" or "Hallucinated content:",
extract the listed items and format them as a proper JSON array in the hallucination_list.

The JSON must follow this exact format:
{"hallucination_list": ["span1", "span2"]}
or for no hallucinations: {"hallucination_list": []}

If you see {"type": "conflict", "span": "text"} format, extract ONLY the span value.
Example:
Input: {"hallucination_list": [
{"type": "conflict", "span": "text1"},
{"type": "baseless", "span": "text2"}]}
Output: {"hallucination_list": ["text1", "text2"]}

Malformed output:
{raw_output})PROMPT";

constexpr const char* kDetectionTemplate =
    R"(You are a hallucination detector for retrieval-augmented generation. Given the context documents and a model's answer, identify every span of the answer that is not supported by or contradicts the context. Be deterministic and conservative: flag only spans the context fails to support.

Context:
{context}
{question_block}
Answer:
{answer}

Return ONLY a JSON object in this exact format:
{"hallucination_list": ["span1", "span2"]}
or for no hallucinations: {"hallucination_list": []}
Do not include any other text.)";

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

const std::vector<std::string>& schema_keys(ReplySchema schema) {
    static const std::vector<std::string> verification = {"answer", "reasoning",
                                                          "is_hallucinated"};
    static const std::vector<std::string> hallucination = {"answer", "hallucinated_answer",
                                                           "reasoning", "is_hallucinated"};
    return schema == ReplySchema::verification ? verification : hallucination;
}

}  // namespace

std::string ReplyError::message() const {
    return (kind == Kind::missing_field ? "missing field: " : "malformed field: ") + field;
}

std::string evidence_text(const corpus::QASample& sample) {
    std::string out;
    for (const auto& p : sample.paragraphs) {
        if (!out.empty()) out += "\n\n";
        if (!p.title.empty()) {
            out += p.title;
            out += "\n";
        }
        out += p.text;
    }
    return out;
}

PromptText render_verification(const corpus::QASample& sample, const std::string& claimed_answer,
                               [[maybe_unused]] bool claimed_truth) {
    auto evidence = evidence_text(sample);
    if (evidence.empty()) throw std::invalid_argument("empty evidence text");
    std::string user = kVerificationTemplate;
    user = replace_all(user, "{question}", sample.question);
    user = replace_all(user, "{evidence_text}", evidence);
    user = replace_all(user, "{answer}", claimed_answer);
    return {std::nullopt, std::move(user)};
}

PromptText render_hallucination(const corpus::QASample& sample) {
    auto evidence = evidence_text(sample);
    if (evidence.empty()) throw std::invalid_argument("empty evidence text");
    std::string user = kHallucinationTemplate;
    user = replace_all(user, "{question}", sample.question);
    user = replace_all(user, "{evidence_text}", evidence);
    user = replace_all(user, "{answer}", sample.answer);
    return {std::nullopt, std::move(user)};
}

PromptText render_detection(const std::string& context, const std::string& question,
                            const std::string& answer) {
    if (context.empty()) throw std::invalid_argument("empty context");
    if (answer.empty()) throw std::invalid_argument("empty answer");
    std::string user = kDetectionTemplate;
    user = replace_all(user, "{context}", context);
    user = replace_all(user, "{question_block}",
                       question.empty() ? "" : "\nQuestion: " + question + "\n");
    user = replace_all(user, "{answer}", answer);
    return {std::nullopt, std::move(user)};
}

PromptText render_json_fix(const std::string& raw_output) {
    if (raw_output.empty()) throw std::invalid_argument("empty raw output");
    std::string user = kJsonFixTemplate;
    user = replace_all(user, "{raw_output}", raw_output);
    return {std::nullopt, std::move(user)};
}

ParseResult parse_reply(std::string_view text, ReplySchema schema, bool exact) {
    const auto& keys = schema_keys(schema);
    StructuredReply reply;
    reply.raw = std::string(text);

    std::string current_key;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;

        // try to match "key: value", tolerating markdown bolding and list
        // markers unless exact mode
        std::string matched_key;
        std::string value;
        size_t colon = line.find(':');
        if (colon != std::string_view::npos) {
            std::string head(line.substr(0, colon));
            if (!exact) {
                head = trim(head);
                if (head.rfind("- ", 0) == 0) head = head.substr(2);
                head = replace_all(head, "**", "");
                head = replace_all(head, "__", "");
                head = trim(head);
                head = to_lower(head);
            }
            if (std::find(keys.begin(), keys.end(), head) != keys.end()) {
                matched_key = head;
                value = trim(line.substr(colon + 1));
                if (!exact) {
                    // value-side bolding: "**key:** value" leaves a leading
                    // "**"; "**true**" is fully wrapped
                    if (value.rfind("**", 0) == 0) value = trim(value.substr(2));
                    if (value.size() >= 2 && value.compare(value.size() - 2, 2, "**") == 0)
                        value = trim(value.substr(0, value.size() - 2));
                }
            }
        }
        if (!matched_key.empty()) {
            reply.fields[matched_key] = value;
            current_key = matched_key;
        } else if (!current_key.empty() && !trim(line).empty()) {
            auto& v = reply.fields[current_key];
            if (!v.empty()) v += "\n";
            v += trim(line);
        }
    }

    for (const auto& k : keys)
        if (!reply.fields.count(k))
            return ReplyError{ReplyError::Kind::missing_field, k};

    auto& flag = reply.fields["is_hallucinated"];
    std::string b = to_lower(trim(flag));
    while (!b.empty() && (b.back() == '.' || b.back() == '!')) b.pop_back();
    if (b == "true")
        flag = "true";
    else if (b == "false")
        flag = "false";
    else
        return ReplyError{ReplyError::Kind::field_format, "is_hallucinated"};
    return reply;
}

std::string format_reply(const std::map<std::string, std::string>& fields, ReplySchema schema) {
    std::string out;
    for (const auto& k : schema_keys(schema)) {
        if (!out.empty()) out += "\n";
        out += k + ": " + (fields.count(k) ? fields.at(k) : "");
    }
    return out;
}

}  // namespace halueval::prompts
