#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace halueval::corpus {

struct Paragraph {
    int idx = 0;
    std::string title;
    std::string text;
    bool is_supporting = false;
};

struct SubQuestion {
    std::string question;
    std::string answer;
};

/// One multi-hop question with its context paragraphs and gold answer.
struct QASample {
    std::string id;
    std::string question;
    std::vector<Paragraph> paragraphs;
    std::string answer;
    std::vector<SubQuestion> decomposition;
    bool answerable = true;
};

enum class TaskType { QA, Summary, Data2Txt };

std::string to_string(TaskType t);
std::optional<TaskType> parse_task_type(std::string_view s);

struct GoldSpan {
    size_t start = 0;  // Unicode scalar offset into response
    size_t end = 0;
    std::string label;
};

struct RagTruthCase {
    std::string case_id;
    TaskType task_type = TaskType::QA;
    std::string context;
    std::string question;  // empty for non-QA tasks
    std::string response;
    std::vector<GoldSpan> gold_spans;
    std::string model_name;

    bool hallucinated() const { return !gold_spans.empty(); }
};

struct Diagnostic {
    std::string file;
    size_t line = 0;  // 1-based; 0 when not line-scoped
    std::string message;
};

nlohmann::ordered_json to_json(const Diagnostic& d);

template <typename T>
struct LoadResult {
    std::vector<T> items;
    std::vector<Diagnostic> diagnostics;
};

/// Line-delimited MuSiQue-format records. Malformed lines are skipped with a
/// diagnostic; order is preserved. Throws std::runtime_error if the file
/// cannot be read.
LoadResult<QASample> load_musique(const std::string& path);

/// RAGTruth layout: a source_info file and a response file joined on
/// source_id. Out-of-range or inverted spans are dropped (case kept);
/// dangling source ids skip the response.
LoadResult<RagTruthCase> load_ragtruth(const std::string& source_path,
                                       const std::string& response_path);

nlohmann::ordered_json to_json(const QASample& s);
QASample sample_from_json(const nlohmann::json& j);

/// Number of Unicode scalar values in a UTF-8 string.
size_t codepoint_length(std::string_view utf8);

}  // namespace halueval::corpus
