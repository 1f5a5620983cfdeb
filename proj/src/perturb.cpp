#include "halueval/perturb.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "halueval/gateway.hpp"
#include "halueval/prompts.hpp"
#include "halueval/tokenizer.hpp"

namespace halueval::perturb {

using nlohmann::json;

std::string to_string(Branch b) { return b == Branch::verified ? "verified" : "perturbed"; }

std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    // strip surrounding ASCII punctuation
    size_t b = 0, e = out.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(out[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(out[e - 1]))) --e;
    return out.substr(b, e - b);
}

std::vector<std::string> validate(const PerturbedRecord& record) {
    std::vector<std::string> violations;
    if (record.reasoning.empty()) violations.push_back("empty reasoning");
    if (record.branch == Branch::perturbed) {
        if (!record.is_hallucinated) violations.push_back("perturbed not labeled hallucinated");
        if (normalize(record.answer) == normalize(record.gold_answer))
            violations.push_back("perturbed equals gold");
        if (record.answer.empty()) violations.push_back("empty perturbed answer");
    }
    return violations;
}

std::optional<Branch> BranchAssigner::assign(const corpus::QASample& sample, double p_halu) {
    if (p_halu < 0.0 || p_halu > 1.0) throw std::invalid_argument("p_halu out of [0, 1]");
    if (!sample.answerable) return std::nullopt;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng_) < p_halu ? Branch::perturbed : Branch::verified;
}

std::variant<PerturbedRecord, std::vector<std::string>> make_record(
    const corpus::QASample& sample, Branch branch, const std::string& reply_text) {
    auto schema = branch == Branch::verified ? prompts::ReplySchema::verification
                                             : prompts::ReplySchema::hallucination;
    auto parsed = prompts::parse_reply(reply_text, schema);
    if (auto* err = std::get_if<prompts::ReplyError>(&parsed))
        return std::vector<std::string>{"unparseable reply: " + err->message()};
    auto& reply = std::get<prompts::StructuredReply>(parsed);

    PerturbedRecord rec;
    rec.sample_id = sample.id;
    rec.question = sample.question;
    rec.context = prompts::evidence_text(sample);
    rec.gold_answer = sample.answer;
    rec.reasoning = reply.fields.at("reasoning");
    rec.branch = branch;
    if (branch == Branch::verified) {
        rec.answer = sample.answer;
        rec.is_hallucinated = reply.is_hallucinated();
    } else {
        rec.answer = reply.fields.at("hallucinated_answer");
        rec.is_hallucinated = true;
        if (!reply.is_hallucinated())
            return std::vector<std::string>{"perturbed reply not marked hallucinated"};
    }
    auto violations = validate(rec);
    if (!violations.empty()) return violations;
    return rec;
}

namespace {

gateway::ChatRequest branch_request(const corpus::QASample& sample, Branch branch,
                                    const std::string& model, double temperature) {
    auto prompt = branch == Branch::verified
                      ? prompts::render_verification(sample, sample.answer, true)
                      : prompts::render_hallucination(sample);
    gateway::ChatRequest req;
    req.model = model;
    req.temperature = temperature;
    req.max_output_tokens = 1024;
    if (prompt.system)
        req.messages.push_back({gateway::ChatMessage::Role::system, *prompt.system});
    req.messages.push_back({gateway::ChatMessage::Role::user, prompt.user});
    return req;
}

}  // namespace

PerturbOutcome perturb_one(const corpus::QASample& sample, Branch branch, gateway::Gateway& gw,
                           int budget, const std::string& model, double temperature) {
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    RecordRejected rejected;
    rejected.sample_id = sample.id;
    for (int attempt = 1; attempt <= budget; ++attempt) {
        auto req = branch_request(sample, branch, model, temperature);
        auto result = gw.complete(req);
        if (!result.ok())
            return TransportFailure{gateway::to_string(result.error->kind) + ": " +
                                    result.error->message};
        auto assembled = make_record(sample, branch, result.response->content);
        if (auto* rec = std::get_if<PerturbedRecord>(&assembled)) return *rec;
        rejected.violations.push_back(std::get<std::vector<std::string>>(assembled));
        rejected.attempts = attempt;
    }
    return rejected;
}

nlohmann::ordered_json to_json(const PerturbedRecord& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["sample_id"] = r.sample_id;
    j["question"] = r.question;
    j["context"] = r.context;
    j["answer"] = r.answer;
    j["reasoning"] = r.reasoning;
    j["is_hallucinated"] = r.is_hallucinated;
    j["gold_answer"] = r.gold_answer;
    j["branch"] = to_string(r.branch);
    return j;
}

PerturbedRecord record_from_json(const json& j) {
    PerturbedRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.context = j.at("context").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.reasoning = j.at("reasoning").get<std::string>();
    r.is_hallucinated = j.at("is_hallucinated").get<bool>();
    r.gold_answer = j.at("gold_answer").get<std::string>();
    r.branch = j.at("branch").get<std::string>() == "perturbed" ? Branch::perturbed
                                                                : Branch::verified;
    return r;
}

nlohmann::ordered_json to_json(const DatasetStats& s) {
    nlohmann::ordered_json j;
    j["total"] = s.total;
    j["hallucinated_fraction"] = s.hallucinated_fraction;
    j["non_hallucinated_fraction"] = s.non_hallucinated_fraction;
    j["avg_context_tokens"] = s.avg_context_tokens;
    j["avg_reasoning_tokens"] = s.avg_reasoning_tokens;
    j["token_counts_approximate"] = true;
    return j;
}

DatasetStats stats_over(const std::vector<PerturbedRecord>& records,
                        const corpus::Tokenizer& tok) {
    DatasetStats s;
    s.total = records.size();
    if (records.empty()) return s;
    size_t halu = 0;
    double ctx = 0, rea = 0;
    for (const auto& r : records) {
        if (r.is_hallucinated) ++halu;
        ctx += static_cast<double>(tok.count(r.context));
        rea += static_cast<double>(tok.count(r.reasoning));
    }
    s.hallucinated_fraction = static_cast<double>(halu) / records.size();
    s.non_hallucinated_fraction = 1.0 - s.hallucinated_fraction;
    s.avg_context_tokens = ctx / records.size();
    s.avg_reasoning_tokens = rea / records.size();
    return s;
}

BuildResult build_dataset(const std::vector<corpus::QASample>& samples, gateway::Gateway& gw,
                          const PerturbConfig& config, const corpus::Tokenizer& tok) {
    if (samples.empty()) {
        BuildResult r;
        r.failed = true;
        r.failure = "empty sample list";
        return r;
    }

    struct Pending {
        const corpus::QASample* sample;
        Branch branch;
        RecordRejected rejected;
        std::optional<PerturbedRecord> record;
    };

    BuildResult result;
    BranchAssigner assigner(config.seed);
    std::vector<Pending> pipeline;
    for (const auto& s : samples) {
        if (!s.answerable && !config.include_unanswerable) {
            ++result.skipped;
            continue;
        }
        auto branch = assigner.assign(s, config.p_halu);
        if (!branch) {
            ++result.skipped;
            continue;
        }
        Pending p;
        p.sample = &s;
        p.branch = *branch;
        p.rejected.sample_id = s.id;
        pipeline.push_back(std::move(p));
    }

    std::vector<size_t> open(pipeline.size());
    for (size_t i = 0; i < open.size(); ++i) open[i] = i;

    for (int round = 1; round <= config.budget && !open.empty(); ++round) {
        std::vector<gateway::ChatRequest> requests;
        requests.reserve(open.size());
        for (size_t idx : open)
            requests.push_back(branch_request(*pipeline[idx].sample, pipeline[idx].branch,
                                              config.model, config.temperature));
        auto replies = gateway::complete_many(gw, requests, config.max_in_flight);

        std::vector<size_t> still_open;
        for (size_t k = 0; k < open.size(); ++k) {
            auto& p = pipeline[open[k]];
            p.rejected.attempts = round;
            if (!replies[k].ok()) {
                p.rejected.violations.push_back(
                    {"transport: " + gateway::to_string(replies[k].error->kind)});
                still_open.push_back(open[k]);
                continue;
            }
            auto assembled = make_record(*p.sample, p.branch, replies[k].response->content);
            if (auto* rec = std::get_if<PerturbedRecord>(&assembled)) {
                p.record = std::move(*rec);
            } else {
                p.rejected.violations.push_back(std::get<std::vector<std::string>>(assembled));
                still_open.push_back(open[k]);
            }
        }
        open = std::move(still_open);
    }

    for (auto& p : pipeline) {
        if (p.record) {
            // verifier judging the gold answer wrong goes to quarantine
            if (p.record->branch == Branch::verified && p.record->is_hallucinated)
                result.quarantined.push_back(std::move(*p.record));
            else
                result.records.push_back(std::move(*p.record));
        } else {
            result.rejects.push_back(std::move(p.rejected));
        }
    }

    result.stats = stats_over(result.records, tok);
    const double reject_fraction =
        static_cast<double>(result.rejects.size()) / static_cast<double>(samples.size());
    if (result.records.empty()) {
        result.failed = true;
        result.failure = "no records accepted";
    } else if (reject_fraction > config.reject_fraction_limit) {
        result.failed = true;
        result.failure = "reject fraction " + std::to_string(reject_fraction) +
                         " exceeds limit " + std::to_string(config.reject_fraction_limit);
    }
    return result;
}

void write_records(const std::vector<PerturbedRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : records) out << to_json(r).dump() << "\n";
}

std::vector<PerturbedRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<PerturbedRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(json::parse(line)));
    }
    return records;
}

void write_rejects(const std::vector<RecordRejected>& rejects, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : rejects) {
        nlohmann::ordered_json j;
        j["sample_id"] = r.sample_id;
        j["attempts"] = r.attempts;
        j["violations"] = r.violations;
        out << j.dump() << "\n";
    }
}

std::optional<ExportFormat> parse_export_format(std::string_view s) {
    if (s == "instruction_pairs") return ExportFormat::instruction_pairs;
    if (s == "conversation_pairs") return ExportFormat::conversation_pairs;
    return std::nullopt;
}

nlohmann::ordered_json training_config() {
    nlohmann::ordered_json j;
    j["warmup_steps"] = 100;
    j["weight_decay"] = 0.1;
    j["per_device_train_batch_size"] = 4;
    j["gradient_accumulation_steps"] = 4;
    j["ddp_timeout"] = 9000;
    j["learning_rate"] = 5e-6;
    j["lr_scheduler_type"] = "cosine";
    j["num_train_epochs"] = 3;
    j["bf16"] = true;
    return j;
}

ExportResult export_finetune(const std::vector<PerturbedRecord>& records, ExportFormat format,
                             const std::string& train_path, const std::string& config_path) {
    std::ofstream out(train_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + train_path);

    ExportResult result;
    for (const auto& r : records) {
        auto prompt = prompts::render_detection(r.context, r.question, r.answer);
        std::string target = "answer: " + r.answer + "\nreasoning: " + r.reasoning +
                             "\nis_hallucinated: " + (r.is_hallucinated ? "true" : "false");
        nlohmann::ordered_json j;
        if (format == ExportFormat::instruction_pairs) {
            j["instruction"] = prompt.user;
            j["output"] = target;
        } else {
            j["messages"] = nlohmann::ordered_json::array(
                {{{"role", "user"}, {"content", prompt.user}},
                 {{"role", "assistant"}, {"content", target}}});
        }
        out << j.dump() << "\n";
        ++result.examples;
    }

    std::ofstream cfg(config_path, std::ios::binary);
    if (!cfg) throw std::runtime_error("cannot write " + config_path);
    cfg << training_config().dump(2) << "\n";
    return result;
}

}  // namespace halueval::perturb
