#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "halueval/corpus.hpp"

namespace halueval::gateway {
class Gateway;
}
namespace halueval::corpus {
class Tokenizer;
}

namespace halueval::perturb {

enum class Branch { verified, perturbed };

std::string to_string(Branch b);

struct PerturbedRecord {
    std::string sample_id;
    std::string question;
    std::string context;
    std::string answer;  // gold (verified branch) or perturbed answer
    std::string reasoning;
    bool is_hallucinated = false;
    std::string gold_answer;
    Branch branch = Branch::verified;
};

nlohmann::ordered_json to_json(const PerturbedRecord& r);
PerturbedRecord record_from_json(const nlohmann::json& j);

/// trim, collapse internal whitespace, case-fold, strip surrounding
/// punctuation — surface-form differences must not count as different.
std::string normalize(std::string_view text);

/// Empty iff all record invariants hold; each entry names the violated
/// invariant.
std::vector<std::string> validate(const PerturbedRecord& record);

/// Sequential Bernoulli stream over answerable samples; deterministic for a
/// fixed seed and input order.
class BranchAssigner {
public:
    explicit BranchAssigner(uint64_t seed) : rng_(seed) {}
    /// nullopt = skipped (unanswerable sample)
    std::optional<Branch> assign(const corpus::QASample& sample, double p_halu);

private:
    std::mt19937_64 rng_;
};

struct RecordRejected {
    std::string sample_id;
    int attempts = 0;
    std::vector<std::vector<std::string>> violations;  // one list per attempt
};

struct TransportFailure {
    std::string message;
};

using PerturbOutcome = std::variant<PerturbedRecord, RecordRejected, TransportFailure>;

/// Render the branch prompt, call the gateway, parse and validate; re-ask up
/// to `budget` times on validation failure.
PerturbOutcome perturb_one(const corpus::QASample& sample, Branch branch, gateway::Gateway& gw,
                           int budget, const std::string& model, double temperature = 0.7);

/// Assemble a record from a raw reply; returns violations instead on any
/// parse or invariant failure.
std::variant<PerturbedRecord, std::vector<std::string>> make_record(
    const corpus::QASample& sample, Branch branch, const std::string& reply_text);

struct DatasetStats {
    size_t total = 0;
    double hallucinated_fraction = 0;
    double non_hallucinated_fraction = 0;
    double avg_context_tokens = 0;
    double avg_reasoning_tokens = 0;
};

nlohmann::ordered_json to_json(const DatasetStats& s);
DatasetStats stats_over(const std::vector<PerturbedRecord>& records,
                        const corpus::Tokenizer& tok);

struct PerturbConfig {
    uint64_t seed = 0;
    double p_halu = 0.5;
    int budget = 3;
    int max_in_flight = 4;
    double reject_fraction_limit = 0.25;
    bool include_unanswerable = false;
    std::string model = "default";
    double temperature = 0.7;
};

struct BuildResult {
    std::vector<PerturbedRecord> records;
    std::vector<PerturbedRecord> quarantined;  // verifier judged gold wrong
    std::vector<RecordRejected> rejects;
    size_t skipped = 0;
    DatasetStats stats;
    bool failed = false;
    std::string failure;
};

/// The full pipeline over a corpus: sequential branch assignment, fan-out
/// through the gateway, deterministic order-aligned assembly.
BuildResult build_dataset(const std::vector<corpus::QASample>& samples, gateway::Gateway& gw,
                          const PerturbConfig& config, const corpus::Tokenizer& tok);

void write_records(const std::vector<PerturbedRecord>& records, const std::string& path);
std::vector<PerturbedRecord> read_records(const std::string& path);
void write_rejects(const std::vector<RecordRejected>& rejects, const std::string& path);

enum class ExportFormat { instruction_pairs, conversation_pairs };
std::optional<ExportFormat> parse_export_format(std::string_view s);

struct ExportResult {
    size_t examples = 0;
};

/// One supervised example per record: input is the detection prompt over
/// (context, question, answer); target is the reply in the standard
/// answer/reasoning/is_hallucinated output format. Also emits the training
/// hyperparameter config.
ExportResult export_finetune(const std::vector<PerturbedRecord>& records, ExportFormat format,
                             const std::string& train_path, const std::string& config_path);

nlohmann::ordered_json training_config();

}  // namespace halueval::perturb
