// Command-line entry point: perturb, stats, export, eval, repair, bench.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "halueval/corpus.hpp"
#include "halueval/evaluator.hpp"
#include "halueval/gateway.hpp"
#include "halueval/hash.hpp"
#include "halueval/http_gateway.hpp"
#include "halueval/manifest.hpp"
#include "halueval/perturb.hpp"
#include "halueval/repair.hpp"
#include "halueval/replay_gateway.hpp"
#include "halueval/tokenizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace halueval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
    std::string config_path;
    std::string endpoint;
    std::string model;
    std::string replay_path;
    std::string record_path;
    std::string audit_path;
    uint64_t seed = 0;
    bool seed_set = false;
    double temperature_generation = 0.7;
    double temperature_detection = 0.0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--endpoint", opts.endpoint, "chat-completions base URL");
    cmd->add_option("--model", opts.model, "model name");
    cmd->add_option("--replay", opts.replay_path, "replay file: serve responses from it");
    cmd->add_option("--record", opts.record_path, "append live responses to this replay file");
    cmd->add_option("--audit", opts.audit_path, "append-only audit log");
}

// precedence: flags > config file > environment
void resolve_config(const CLI::App* cmd, CommonOptions& opts) {
    auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? v : "";
    };
    json file_cfg = json::object();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw CLI::ValidationError("--config", "cannot open " + opts.config_path);
        in >> file_cfg;
    }
    auto pick = [&](const char* flag, std::string& slot, const char* key, const char* env_name) {
        if (cmd->count(flag)) return;
        if (file_cfg.contains(key) && file_cfg[key].is_string()) {
            slot = file_cfg[key].get<std::string>();
            return;
        }
        auto e = env(env_name);
        if (!e.empty()) slot = e;
    };
    pick("--endpoint", opts.endpoint, "endpoint", "HALUEVAL_ENDPOINT");
    pick("--model", opts.model, "model", "HALUEVAL_MODEL");
    if (!cmd->count("--seed") && file_cfg.contains("seed")) {
        opts.seed = file_cfg["seed"].get<uint64_t>();
        opts.seed_set = true;
    }
    if (file_cfg.contains("temperature_generation"))
        opts.temperature_generation = file_cfg["temperature_generation"].get<double>();
    if (file_cfg.contains("temperature_detection"))
        opts.temperature_detection = file_cfg["temperature_detection"].get<double>();
}

struct GatewayStack {
    std::unique_ptr<gateway::Gateway> base;
    std::unique_ptr<gateway::RetryingGateway> retrying;
    std::unique_ptr<gateway::AuditLog> audit;
    std::unique_ptr<gateway::RecordingGateway> recording;
    gateway::Gateway* active = nullptr;
    std::string identity;
};

GatewayStack make_gateway(const CommonOptions& opts) {
    GatewayStack stack;
    if (!opts.replay_path.empty()) {
        stack.base = std::make_unique<gateway::ReplayGateway>(opts.replay_path);
        stack.active = stack.base.get();
        stack.identity = "replay:" + opts.replay_path;
    } else if (!opts.endpoint.empty()) {
        gateway::EndpointConfig cfg;
        cfg.base_url = opts.endpoint;
        const char* key = std::getenv("HALUEVAL_API_KEY");  // credential via env only
        if (key) cfg.api_key = key;
        stack.base = std::make_unique<gateway::HttpGateway>(cfg);
        stack.retrying =
            std::make_unique<gateway::RetryingGateway>(*stack.base, gateway::RetryPolicy{});
        stack.active = stack.retrying.get();
        stack.identity = opts.endpoint;
    } else {
        throw CLI::ValidationError("gateway", "need --endpoint or --replay");
    }
    if (!opts.audit_path.empty())
        stack.audit = std::make_unique<gateway::AuditLog>(opts.audit_path);
    if (!opts.record_path.empty() || stack.audit) {
        stack.recording = std::make_unique<gateway::RecordingGateway>(
            *stack.active,
            opts.record_path.empty() ? opts.audit_path + ".replay" : opts.record_path,
            stack.audit.get());
        stack.active = stack.recording.get();
    }
    return stack;
}

void print_diagnostics(const std::vector<corpus::Diagnostic>& diags) {
    for (const auto& d : diags) std::cerr << corpus::to_json(d).dump() << "\n";
}

std::unique_ptr<corpus::Tokenizer> make_tokenizer(const std::string& vocab_path) {
    if (vocab_path.empty()) return std::make_unique<corpus::BasicTokenizer>();
    return std::make_unique<corpus::VocabTokenizer>(corpus::VocabTokenizer::load(vocab_path));
}

nlohmann::ordered_json distribution_to_json(const corpus::LengthDistribution& d) {
    nlohmann::ordered_json j;
    j["count"] = d.count;
    j["bucket_width"] = d.bucket_width;
    j["mean"] = d.mean ? nlohmann::ordered_json(*d.mean) : nlohmann::ordered_json(nullptr);
    j["median"] = d.median ? nlohmann::ordered_json(*d.median) : nlohmann::ordered_json(nullptr);
    j["max"] = d.max;
    j["histogram"] = nlohmann::ordered_json::array();
    for (const auto& [lb, freq] : d.histogram)
        j["histogram"].push_back({{"bucket_start", lb}, {"count", freq}});
    j["token_counts_approximate"] = true;
    return j;
}

int run_perturb(const CLI::App* cmd, CommonOptions& common, const std::string& corpus_path,
                const std::string& out_dir, perturb::PerturbConfig pcfg,
                const std::string& manifest_path) {
    resolve_config(cmd, common);
    if (common.seed_set) pcfg.seed = common.seed;
    if (!common.model.empty()) pcfg.model = common.model;
    pcfg.temperature = common.temperature_generation;

    fs::create_directories(out_dir);
    cli::RunManifest manifest;
    manifest.command = "perturb";
    manifest.seed = pcfg.seed;
    manifest.start_ms = cli::now_ms();
    manifest.config = {{"seed", pcfg.seed},
                       {"p_halu", pcfg.p_halu},
                       {"budget", pcfg.budget},
                       {"max_in_flight", pcfg.max_in_flight},
                       {"reject_fraction_limit", pcfg.reject_fraction_limit},
                       {"include_unanswerable", pcfg.include_unanswerable},
                       {"model", pcfg.model}};
    const std::string mpath =
        manifest_path.empty() ? (fs::path(out_dir) / "manifest.json").string() : manifest_path;

    try {
        auto loaded = corpus::load_musique(corpus_path);
        print_diagnostics(loaded.diagnostics);
        auto stack = make_gateway(common);
        manifest.endpoint_hash = digest_hex(stack.identity);
        corpus::BasicTokenizer tok;
        auto result = perturb::build_dataset(loaded.items, *stack.active, pcfg, tok);

        perturb::write_records(result.records, (fs::path(out_dir) / "dataset.jsonl").string());
        perturb::write_records(result.quarantined,
                               (fs::path(out_dir) / "quarantine.jsonl").string());
        perturb::write_rejects(result.rejects, (fs::path(out_dir) / "rejects.jsonl").string());
        {
            std::ofstream stats_out(fs::path(out_dir) / "stats.json", std::ios::binary);
            stats_out << perturb::to_json(result.stats).dump(2) << "\n";
        }
        for (const char* name : {"dataset.jsonl", "quarantine.jsonl", "rejects.jsonl", "stats.json"})
            manifest.add_output((fs::path(out_dir) / name).string());

        std::cout << "total: " << result.stats.total
                  << "\nhallucinated_fraction: " << result.stats.hallucinated_fraction
                  << "\nnon_hallucinated_fraction: " << result.stats.non_hallucinated_fraction
                  << "\nrejected: " << result.rejects.size()
                  << "\nquarantined: " << result.quarantined.size()
                  << "\nskipped: " << result.skipped << "\n";

        manifest.end_ms = cli::now_ms();
        if (result.failed) {
            manifest.status = "failure";
            manifest.failure_cause = result.failure;
            manifest.write(mpath);
            std::cerr << "perturb run failed: " << result.failure << "\n";
            return kExitRuntime;
        }
        manifest.write(mpath);
        return kExitOk;
    } catch (const CLI::ValidationError&) {
        throw;  // usage error, handled by the caller as exit 2
    } catch (const std::exception& e) {
        manifest.end_ms = cli::now_ms();
        manifest.status = "failure";
        manifest.failure_cause = e.what();
        manifest.write(mpath);
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hallucination-detection data pipeline and evaluation harness"};
    app.require_subcommand(1);

    // ---- perturb ----
    auto* perturb_cmd = app.add_subcommand("perturb", "build a perturbed training dataset");
    CommonOptions perturb_common;
    add_common(perturb_cmd, perturb_common);
    std::string perturb_corpus, perturb_out = "out", perturb_manifest;
    perturb::PerturbConfig pcfg;
    perturb_cmd->add_option("--corpus", perturb_corpus, "MuSiQue-format JSONL corpus")
        ->required();
    perturb_cmd->add_option("--out-dir", perturb_out, "output directory");
    perturb_cmd->add_option("--seed", perturb_common.seed, "RNG seed");
    perturb_cmd->add_option("--p-halu", pcfg.p_halu, "probability of the perturbed branch");
    perturb_cmd->add_option("--budget", pcfg.budget, "re-ask budget per record");
    perturb_cmd->add_option("--max-in-flight", pcfg.max_in_flight, "request concurrency bound");
    perturb_cmd->add_option("--reject-limit", pcfg.reject_fraction_limit,
                            "failure threshold on rejected fraction");
    perturb_cmd->add_flag("--include-unanswerable", pcfg.include_unanswerable,
                          "also perturb unanswerable samples");
    perturb_cmd->add_option("--manifest", perturb_manifest, "manifest path");

    // ---- stats ----
    auto* stats_cmd = app.add_subcommand("stats", "context token length distribution");
    std::string stats_corpus, stats_vocab, stats_out, stats_manifest;
    long bucket_width = 256;
    stats_cmd->add_option("--corpus", stats_corpus, "MuSiQue-format JSONL corpus")->required();
    stats_cmd->add_option("--bucket-width", bucket_width, "histogram bucket width (tokens)");
    stats_cmd->add_option("--vocab", stats_vocab, "optional vocabulary file tokenizer");
    stats_cmd->add_option("--out", stats_out, "write report here instead of stdout");
    stats_cmd->add_option("--manifest", stats_manifest, "manifest path");

    // ---- export ----
    auto* export_cmd = app.add_subcommand("export", "emit fine-tuning files from a dataset");
    std::string export_records, export_format = "instruction_pairs";
    std::string export_out = "train.jsonl", export_cfg = "training_config.json",
                export_manifest;
    export_cmd->add_option("--records", export_records, "dataset.jsonl from perturb")
        ->required();
    export_cmd->add_option("--format", export_format,
                           "instruction_pairs or conversation_pairs");
    export_cmd->add_option("--out", export_out, "training examples output");
    export_cmd->add_option("--config-out", export_cfg, "hyperparameter config output");
    export_cmd->add_option("--manifest", export_manifest, "manifest path");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "run a detector over RAGTruth-format cases");
    CommonOptions eval_common;
    add_common(eval_cmd, eval_common);
    std::string eval_source, eval_response, eval_out = "report.json", eval_csv, eval_manifest;
    std::vector<std::string> eval_tasks;
    bool no_llm_fix = false;
    std::string fail_policy = "not_flagged";
    eval_cmd->add_option("--source", eval_source, "RAGTruth source_info file")->required();
    eval_cmd->add_option("--response", eval_response, "RAGTruth response file")->required();
    eval_cmd->add_option("--out", eval_out, "report output path");
    eval_cmd->add_option("--csv", eval_csv, "optional per-case CSV export");
    eval_cmd->add_option("--task-type", eval_tasks, "filter cases by task type (repeatable)");
    eval_cmd->add_flag("--no-llm-fix", no_llm_fix, "forbid LLM repair escalation");
    eval_cmd->add_option("--fail-policy", fail_policy, "not_flagged or excluded");
    eval_cmd->add_option("--seed", eval_common.seed, "RNG seed (manifest only)");
    eval_cmd->add_option("--manifest", eval_manifest, "manifest path");

    // ---- repair ----
    auto* repair_cmd = app.add_subcommand("repair", "stdin -> stdout verdict repair filter");
    std::string repair_manifest;
    repair_cmd->add_option("--manifest", repair_manifest, "optional manifest path");

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "token throughput probe");
    CommonOptions bench_common;
    add_common(bench_cmd, bench_common);
    long bench_len = 6144;
    int bench_runs = 5, bench_max_tokens = 256;
    std::string bench_manifest;
    bench_cmd->add_option("--input-length", bench_len, "prompt length in tokens");
    bench_cmd->add_option("--runs", bench_runs, "number of probe runs");
    bench_cmd->add_option("--max-output-tokens", bench_max_tokens, "completion budget per run");
    bench_cmd->add_option("--seed", bench_common.seed, "RNG seed (manifest only)");
    bench_cmd->add_option("--manifest", bench_manifest, "manifest path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (perturb_cmd->parsed()) {
            if (perturb_cmd->count("--seed")) perturb_common.seed_set = true;
            return run_perturb(perturb_cmd, perturb_common, perturb_corpus, perturb_out, pcfg,
                               perturb_manifest);
        }

        if (stats_cmd->parsed()) {
            cli::RunManifest manifest;
            manifest.command = "stats";
            manifest.start_ms = cli::now_ms();
            manifest.config = {{"bucket_width", bucket_width}, {"vocab", stats_vocab}};
            try {
                if (bucket_width <= 0)
                    throw CLI::ValidationError("--bucket-width", "must be > 0");
                auto loaded = corpus::load_musique(stats_corpus);
                print_diagnostics(loaded.diagnostics);
                auto tok = make_tokenizer(stats_vocab);
                auto dist = corpus::distribution(loaded.items, *tok, bucket_width);
                auto j = distribution_to_json(dist);
                if (stats_out.empty()) {
                    std::cout << j.dump(2) << "\n";
                } else {
                    std::ofstream out(stats_out, std::ios::binary);
                    out << j.dump(2) << "\n";
                    manifest.add_output(stats_out);
                }
                manifest.end_ms = cli::now_ms();
                if (!stats_manifest.empty()) manifest.write(stats_manifest);
                return kExitOk;
            } catch (const CLI::ValidationError&) {
                throw;
            } catch (const std::exception& e) {
                manifest.end_ms = cli::now_ms();
                manifest.status = "failure";
                manifest.failure_cause = e.what();
                if (!stats_manifest.empty()) manifest.write(stats_manifest);
                std::cerr << "error: " << e.what() << "\n";
                return kExitRuntime;
            }
        }

        if (export_cmd->parsed()) {
            auto fmt = perturb::parse_export_format(export_format);
            if (!fmt) {
                std::cerr << "error: unknown format '" << export_format << "'\n";
                return kExitUsage;
            }
            cli::RunManifest manifest;
            manifest.command = "export";
            manifest.start_ms = cli::now_ms();
            manifest.config = {{"format", export_format}};
            try {
                auto records = perturb::read_records(export_records);
                auto result = perturb::export_finetune(records, *fmt, export_out, export_cfg);
                manifest.add_output(export_out);
                manifest.add_output(export_cfg);
                manifest.end_ms = cli::now_ms();
                if (!export_manifest.empty()) manifest.write(export_manifest);
                std::cout << "examples: " << result.examples << "\n";
                return kExitOk;
            } catch (const std::exception& e) {
                manifest.end_ms = cli::now_ms();
                manifest.status = "failure";
                manifest.failure_cause = e.what();
                if (!export_manifest.empty()) manifest.write(export_manifest);
                std::cerr << "error: " << e.what() << "\n";
                return kExitRuntime;
            }
        }

        if (eval_cmd->parsed()) {
            resolve_config(eval_cmd, eval_common);
            cli::RunManifest manifest;
            manifest.command = "eval";
            manifest.start_ms = cli::now_ms();
            manifest.config = {{"no_llm_fix", no_llm_fix},
                               {"fail_policy", fail_policy},
                               {"task_types", eval_tasks}};
            try {
                eval::EvalOptions options;
                options.allow_llm_fix = !no_llm_fix;
                options.model = eval_common.model.empty() ? "default" : eval_common.model;
                if (fail_policy == "excluded")
                    options.fail_policy = eval::FailPolicy::excluded;
                else if (fail_policy != "not_flagged")
                    throw CLI::ValidationError("--fail-policy", "unknown policy " + fail_policy);
                for (const auto& t : eval_tasks) {
                    auto tt = corpus::parse_task_type(t);
                    if (!tt) throw CLI::ValidationError("--task-type", "unknown task " + t);
                    options.task_filter.insert(*tt);
                }
                auto loaded = corpus::load_ragtruth(eval_source, eval_response);
                print_diagnostics(loaded.diagnostics);
                auto stack = make_gateway(eval_common);
                manifest.endpoint_hash = digest_hex(stack.identity);
                auto report = eval::evaluate(loaded.items, *stack.active, options);
                {
                    std::ofstream out(eval_out, std::ios::binary);
                    out << eval::report_to_json(report).dump(2) << "\n";
                }
                manifest.add_output(eval_out);
                if (!eval_csv.empty()) {
                    std::ofstream out(eval_csv, std::ios::binary);
                    out << eval::per_case_csv(report);
                    manifest.add_output(eval_csv);
                }
                manifest.end_ms = cli::now_ms();
                if (!eval_manifest.empty()) manifest.write(eval_manifest);
                std::cout << eval::report_to_json(report)["metrics"].dump() << "\n";
                return kExitOk;
            } catch (const CLI::ValidationError&) {
                throw;
            } catch (const std::exception& e) {
                manifest.end_ms = cli::now_ms();
                manifest.status = "failure";
                manifest.failure_cause = e.what();
                if (!eval_manifest.empty()) manifest.write(eval_manifest);
                std::cerr << "error: " << e.what() << "\n";
                return kExitRuntime;
            }
        }

        if (repair_cmd->parsed()) {
            std::ostringstream buf;
            buf << std::cin.rdbuf();
            std::string input = buf.str();
            if (input.find_first_not_of(" \t\r\n") == std::string::npos) {
                std::cerr << "error: empty input\n";
                return kExitUsage;
            }
            auto outcome = repair::repair(input);
            if (outcome.verdict) std::cout << repair::serialize(*outcome.verdict) << "\n";
            std::cout << "method: " << repair::to_string(outcome.method) << "\n";
            if (!repair_manifest.empty()) {
                cli::RunManifest manifest;
                manifest.command = "repair";
                manifest.start_ms = manifest.end_ms = cli::now_ms();
                manifest.config = {{"method", repair::to_string(outcome.method)}};
                manifest.write(repair_manifest);
            }
            return kExitOk;
        }

        if (bench_cmd->parsed()) {
            resolve_config(bench_cmd, bench_common);
            if (bench_runs < 1) {
                std::cerr << "error: --runs must be >= 1\n";
                return kExitUsage;
            }
            cli::RunManifest manifest;
            manifest.command = "bench";
            manifest.start_ms = cli::now_ms();
            manifest.config = {{"input_length", bench_len},
                               {"runs", bench_runs},
                               {"max_output_tokens", bench_max_tokens}};
            try {
                auto stack = make_gateway(bench_common);
                manifest.endpoint_hash = digest_hex(stack.identity);
                auto report = gateway::throughput_probe(
                    *stack.active, bench_common.model.empty() ? "default" : bench_common.model,
                    bench_len, bench_runs, bench_max_tokens);
                nlohmann::ordered_json j;
                j["input_length"] = report.input_length;
                j["runs"] = report.runs;
                j["tokens_per_second"] = report.tokens_per_second;
                j["failures"] = report.failures;
                j["partial"] = report.partial;
                j["samples"] = nlohmann::ordered_json::array();
                for (const auto& s : report.samples)
                    j["samples"].push_back({{"completion_tokens", s.completion_tokens},
                                            {"seconds", s.seconds},
                                            {"ok", s.ok}});
                std::cout << j.dump(2) << "\n";
                manifest.end_ms = cli::now_ms();
                if (!bench_manifest.empty()) manifest.write(bench_manifest);
                return kExitOk;
            } catch (const std::exception& e) {
                manifest.end_ms = cli::now_ms();
                manifest.status = "failure";
                manifest.failure_cause = e.what();
                if (!bench_manifest.empty()) manifest.write(bench_manifest);
                std::cerr << "error: " << e.what() << "\n";
                return kExitRuntime;
            }
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
