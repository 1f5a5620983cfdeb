#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "halueval/corpus.hpp"
#include "halueval/repair.hpp"

namespace halueval::gateway {
class Gateway;
}

namespace halueval::eval {

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
    std::optional<double> recall, precision, f1, accuracy;
};

/// Response-level classification: hallucinated iff any span was flagged.
bool classify(const repair::DetectorVerdict& verdict);

ConfusionCounts confusion(const std::vector<bool>& predictions,
                          const std::vector<bool>& actuals);

/// Zero-denominator metrics are absent, never 0.
Metrics metrics(const ConfusionCounts& counts);

/// Harmonic mean; absent when either input is absent or both are zero.
std::optional<double> f1_from(std::optional<double> recall, std::optional<double> precision);

struct CaseTrace {
    std::string case_id;
    bool predicted = false;
    bool actual = false;
    std::string method;  // repair method, or "failed"
    std::vector<std::string> spans;
    bool prediction_failed = false;
};

struct EvalReport {
    ConfusionCounts counts;
    Metrics m;
    std::vector<CaseTrace> per_case;
    std::map<std::string, long> repair_method_histogram;
    long prediction_failed = 0;
    long excluded = 0;
    long llm_fix_attempts = 0;
    long llm_fix_successes = 0;
};

enum class FailPolicy { not_flagged, excluded };

struct EvalOptions {
    std::string model = "default";
    bool allow_llm_fix = true;
    std::set<corpus::TaskType> task_filter;  // empty = all
    FailPolicy fail_policy = FailPolicy::not_flagged;
    int max_in_flight = 4;
    repair::RepairOptions repair_options;
};

/// One detection call per case, deterministic repair (LLM escalation only
/// when allowed), response-level comparison against gold spans.
EvalReport evaluate(const std::vector<corpus::RagTruthCase>& cases, gateway::Gateway& gw,
                    const EvalOptions& options);

nlohmann::ordered_json report_to_json(const EvalReport& report);
std::string per_case_csv(const EvalReport& report);

}  // namespace halueval::eval
