#include "halueval/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace halueval::corpus {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw std::runtime_error(std::string("missing or non-string field '") + key + "'");
    return j.at(key).get<std::string>();
}

std::vector<std::string> read_all_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::QA: return "QA";
        case TaskType::Summary: return "Summary";
        case TaskType::Data2Txt: return "Data2Txt";
    }
    return "QA";
}

std::optional<TaskType> parse_task_type(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lower == "qa") return TaskType::QA;
    if (lower == "summary" || lower == "summarization") return TaskType::Summary;
    if (lower == "data2txt" || lower == "data2text") return TaskType::Data2Txt;
    return std::nullopt;
}

nlohmann::ordered_json to_json(const Diagnostic& d) {
    nlohmann::ordered_json j;
    j["file"] = d.file;
    j["line"] = d.line;
    j["message"] = d.message;
    return j;
}

size_t codepoint_length(std::string_view utf8) {
    size_t n = 0;
    for (unsigned char c : utf8)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

QASample sample_from_json(const json& j) {
    QASample s;
    s.id = j.contains("id") && j.at("id").is_number()
               ? std::to_string(j.at("id").get<long long>())
               : require_string(j, "id");
    if (s.id.empty()) throw std::runtime_error("empty sample id");
    s.question = require_string(j, "question");
    s.answer = j.value("answer", std::string{});
    s.answerable = j.value("answerable", true);
    if (s.answerable && s.answer.empty())
        throw std::runtime_error("answerable sample with empty answer");
    if (!j.contains("paragraphs") || !j.at("paragraphs").is_array())
        throw std::runtime_error("missing paragraphs array");
    std::unordered_set<int> seen_idx;
    for (const auto& p : j.at("paragraphs")) {
        Paragraph para;
        para.idx = p.value("idx", static_cast<int>(s.paragraphs.size()));
        para.title = p.value("title", std::string{});
        para.text = require_string(p, "paragraph_text");
        para.is_supporting = p.value("is_supporting", false);
        if (para.text.empty()) throw std::runtime_error("empty paragraph text");
        if (!seen_idx.insert(para.idx).second)
            throw std::runtime_error("duplicate paragraph idx");
        s.paragraphs.push_back(std::move(para));
    }
    if (j.contains("question_decomposition")) {
        for (const auto& d : j.at("question_decomposition")) {
            SubQuestion sq;
            sq.question = require_string(d, "question");
            sq.answer = d.value("answer", std::string{});
            s.decomposition.push_back(std::move(sq));
        }
    }
    return s;
}

nlohmann::ordered_json to_json(const QASample& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["question"] = s.question;
    j["paragraphs"] = nlohmann::ordered_json::array();
    for (const auto& p : s.paragraphs) {
        nlohmann::ordered_json pj;
        pj["idx"] = p.idx;
        pj["title"] = p.title;
        pj["paragraph_text"] = p.text;
        pj["is_supporting"] = p.is_supporting;
        j["paragraphs"].push_back(std::move(pj));
    }
    j["question_decomposition"] = nlohmann::ordered_json::array();
    for (const auto& d : s.decomposition) {
        nlohmann::ordered_json dj;
        dj["question"] = d.question;
        dj["answer"] = d.answer;
        j["question_decomposition"].push_back(std::move(dj));
    }
    j["answer"] = s.answer;
    j["answerable"] = s.answerable;
    return j;
}

LoadResult<QASample> load_musique(const std::string& path) {
    LoadResult<QASample> out;
    std::unordered_set<std::string> seen_ids;
    size_t lineno = 0;
    for (const auto& line : read_all_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            auto s = sample_from_json(j);
            if (!seen_ids.insert(s.id).second)
                throw std::runtime_error("duplicate sample id '" + s.id + "'");
            out.items.push_back(std::move(s));
        } catch (const std::exception& e) {
            out.diagnostics.push_back({path, lineno, e.what()});
        }
    }
    return out;
}

namespace {

struct SourceRecord {
    TaskType task_type;
    std::string context;
    std::string question;
};

std::string flatten_source_info(const json& info) {
    if (info.is_string()) return info.get<std::string>();
    if (info.is_object()) {
        std::string out;
        for (auto it = info.begin(); it != info.end(); ++it) {
            if (!out.empty()) out += "\n\n";
            if (it.value().is_string())
                out += it.value().get<std::string>();
            else
                out += it.value().dump();
        }
        return out;
    }
    return info.dump();
}

}  // namespace

LoadResult<RagTruthCase> load_ragtruth(const std::string& source_path,
                                       const std::string& response_path) {
    LoadResult<RagTruthCase> out;
    std::unordered_map<std::string, SourceRecord> sources;

    size_t lineno = 0;
    for (const auto& line : read_all_lines(source_path)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            auto source_id = require_string(j, "source_id");
            auto tt = parse_task_type(j.value("task_type", std::string{"QA"}));
            if (!tt) throw std::runtime_error("unknown task_type");
            SourceRecord rec;
            rec.task_type = *tt;
            if (j.contains("source_info") && j.at("source_info").is_object() &&
                j.at("source_info").contains("question")) {
                const auto& info = j.at("source_info");
                rec.question = info.at("question").get<std::string>();
                if (info.contains("passages") && info.at("passages").is_string())
                    rec.context = info.at("passages").get<std::string>();
                else {
                    json rest = info;
                    rest.erase("question");
                    rec.context = flatten_source_info(rest);
                }
            } else if (j.contains("source_info")) {
                rec.context = flatten_source_info(j.at("source_info"));
            } else {
                rec.context = j.value("prompt", std::string{});
            }
            sources[source_id] = std::move(rec);
        } catch (const std::exception& e) {
            out.diagnostics.push_back({source_path, lineno, e.what()});
        }
    }

    lineno = 0;
    for (const auto& line : read_all_lines(response_path)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            auto source_id = require_string(j, "source_id");
            auto it = sources.find(source_id);
            if (it == sources.end()) {
                out.diagnostics.push_back(
                    {response_path, lineno, "dangling source_id '" + source_id + "'"});
                continue;
            }
            RagTruthCase c;
            c.case_id = j.value("id", std::string{});
            c.model_name = j.value("model", std::string{});
            if (c.case_id.empty()) c.case_id = source_id + "::" + c.model_name;
            c.task_type = it->second.task_type;
            c.context = it->second.context;
            c.question = it->second.question;
            c.response = require_string(j, "response");
            const size_t resp_len = codepoint_length(c.response);
            if (j.contains("labels") && j.at("labels").is_array()) {
                for (const auto& lab : j.at("labels")) {
                    GoldSpan span;
                    long long start = lab.value("start", -1LL);
                    long long end = lab.value("end", -1LL);
                    span.label = lab.value("label_type", std::string{});
                    if (start < 0 || end <= start) {
                        out.diagnostics.push_back({response_path, lineno,
                                                   "inverted span (" + std::to_string(start) +
                                                       ", " + std::to_string(end) + "), dropped"});
                        continue;
                    }
                    if (static_cast<size_t>(end) > resp_len) {
                        out.diagnostics.push_back({response_path, lineno,
                                                   "out-of-range span end " + std::to_string(end) +
                                                       " > " + std::to_string(resp_len) +
                                                       ", dropped"});
                        continue;
                    }
                    span.start = static_cast<size_t>(start);
                    span.end = static_cast<size_t>(end);
                    c.gold_spans.push_back(std::move(span));
                }
            }
            out.items.push_back(std::move(c));
        } catch (const std::exception& e) {
            out.diagnostics.push_back({response_path, lineno, e.what()});
        }
    }
    return out;
}

}  // namespace halueval::corpus
