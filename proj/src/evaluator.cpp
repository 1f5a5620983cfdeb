#include "halueval/evaluator.hpp"

#include <sstream>
#include <stdexcept>

#include "halueval/gateway.hpp"
#include "halueval/prompts.hpp"

namespace halueval::eval {

bool classify(const repair::DetectorVerdict& verdict) { return !verdict.spans.empty(); }

ConfusionCounts confusion(const std::vector<bool>& predictions,
                          const std::vector<bool>& actuals) {
    if (predictions.size() != actuals.size())
        throw std::invalid_argument("predictions/actuals length mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] && actuals[i]) ++c.tp;
        else if (predictions[i] && !actuals[i]) ++c.fp;
        else if (!predictions[i] && actuals[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

std::optional<double> f1_from(std::optional<double> recall, std::optional<double> precision) {
    if (!recall || !precision) return std::nullopt;
    if (*recall + *precision == 0.0) return std::nullopt;
    return 2.0 * *recall * *precision / (*recall + *precision);
}

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
    if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    m.f1 = f1_from(m.recall, m.precision);
    if (c.total() > 0) m.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
    return m;
}

EvalReport evaluate(const std::vector<corpus::RagTruthCase>& cases, gateway::Gateway& gw,
                    const EvalOptions& options) {
    std::vector<const corpus::RagTruthCase*> selected;
    for (const auto& c : cases)
        if (options.task_filter.empty() || options.task_filter.count(c.task_type))
            selected.push_back(&c);
    if (selected.empty()) throw std::invalid_argument("no cases after task filtering");

    std::vector<gateway::ChatRequest> requests;
    requests.reserve(selected.size());
    for (const auto* c : selected) {
        auto prompt = prompts::render_detection(c->context, c->question, c->response);
        gateway::ChatRequest req;
        req.model = options.model;
        req.temperature = 0.0;
        req.max_output_tokens = 1024;
        req.messages.push_back({gateway::ChatMessage::Role::user, prompt.user});
        requests.push_back(std::move(req));
    }
    auto replies = gateway::complete_many(gw, requests, options.max_in_flight);

    EvalReport report;
    std::vector<bool> predictions, actuals;
    for (size_t i = 0; i < selected.size(); ++i) {
        const auto& c = *selected[i];
        CaseTrace trace;
        trace.case_id = c.case_id;
        trace.actual = c.hallucinated();

        std::optional<repair::DetectorVerdict> verdict;
        if (replies[i].ok()) {
            auto outcome = repair::repair(replies[i].response->content, options.repair_options);
            ++report.repair_method_histogram[repair::to_string(outcome.method)];
            trace.method = repair::to_string(outcome.method);
            if (outcome.verdict) {
                verdict = std::move(outcome.verdict);
            } else if (options.allow_llm_fix) {
                ++report.llm_fix_attempts;
                auto fixed = repair::repair_with_llm(replies[i].response->content, gw,
                                                     options.model);
                if (auto* v = std::get_if<repair::DetectorVerdict>(&fixed)) {
                    verdict = std::move(*v);
                    ++report.llm_fix_successes;
                }
            }
        } else {
            trace.method = "transport_failed";
        }

        if (verdict) {
            trace.predicted = classify(*verdict);
            trace.spans = verdict->spans;
        } else {
            trace.prediction_failed = true;
            ++report.prediction_failed;
            if (options.fail_policy == FailPolicy::excluded) {
                ++report.excluded;
                report.per_case.push_back(std::move(trace));
                continue;
            }
            trace.predicted = false;  // unusable output counts as not flagged
        }
        predictions.push_back(trace.predicted);
        actuals.push_back(trace.actual);
        report.per_case.push_back(std::move(trace));
    }

    report.counts = confusion(predictions, actuals);
    report.m = metrics(report.counts);
    return report;
}

namespace {

nlohmann::ordered_json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["counts"] = {{"tp", report.counts.tp},
                   {"fp", report.counts.fp},
                   {"tn", report.counts.tn},
                   {"fn", report.counts.fn}};
    j["metrics"] = {{"recall", opt_to_json(report.m.recall)},
                    {"precision", opt_to_json(report.m.precision)},
                    {"f1", opt_to_json(report.m.f1)},
                    {"accuracy", opt_to_json(report.m.accuracy)}};
    j["repair_method_histogram"] = report.repair_method_histogram;
    j["prediction_failed"] = report.prediction_failed;
    j["excluded"] = report.excluded;
    j["llm_fix_attempts"] = report.llm_fix_attempts;
    j["llm_fix_successes"] = report.llm_fix_successes;
    j["per_case"] = nlohmann::ordered_json::array();
    for (const auto& t : report.per_case) {
        nlohmann::ordered_json tj;
        tj["case_id"] = t.case_id;
        tj["predicted"] = t.predicted;
        tj["actual"] = t.actual;
        tj["method"] = t.method;
        tj["spans"] = t.spans;
        tj["prediction_failed"] = t.prediction_failed;
        j["per_case"].push_back(std::move(tj));
    }
    return j;
}

std::string per_case_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "case_id,predicted,actual,method,span_count,prediction_failed\n";
    for (const auto& t : report.per_case) {
        std::string id = t.case_id;
        bool needs_quotes = id.find_first_of(",\"\n") != std::string::npos;
        if (needs_quotes) {
            std::string quoted = "\"";
            for (char c : id) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            quoted += "\"";
            id = quoted;
        }
        out << id << "," << (t.predicted ? "true" : "false") << ","
            << (t.actual ? "true" : "false") << "," << t.method << "," << t.spans.size() << ","
            << (t.prediction_failed ? "true" : "false") << "\n";
    }
    return out.str();
}

}  // namespace halueval::eval
