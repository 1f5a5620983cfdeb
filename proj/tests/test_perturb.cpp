#include <doctest.h>

#include <cmath>

#include "halueval/perturb.hpp"
#include "halueval/scripted_gateway.hpp"
#include "halueval/tokenizer.hpp"
#include "helpers.hpp"

using namespace halueval::perturb;
using halueval::gateway::ChatRequest;
using halueval::gateway::ChatResponse;
using halueval::gateway::ChatResult;
using halueval::gateway::GatewayError;
using halueval::gateway::ScriptedGateway;
using testutil::make_sample;

namespace {

bool is_hallucination_prompt(const ChatRequest& req) {
    return req.messages.back().content.find("hallucinated_answer:") != std::string::npos;
}

std::string prompt_field(const ChatRequest& req, const std::string& label) {
    const auto& text = req.messages.back().content;
    auto pos = text.find(label);
    REQUIRE(pos != std::string::npos);
    pos += label.size();
    auto end = text.find('\n', pos);
    return text.substr(pos, end - pos);
}

// A cooperative model: answers both branch prompts with well-formed replies.
ScriptedGateway::Handler cooperative_model() {
    return [](const ChatRequest& req) {
        ChatResponse resp;
        resp.completion_tokens = 20;
        if (is_hallucination_prompt(req)) {
            auto gold = prompt_field(req, "Gold Answer: ");
            resp.content = "answer: " + gold + "\nhallucinated_answer: not-" + gold +
                           "\nreasoning: swapped the entity for a nearby one\n"
                           "is_hallucinated: true";
        } else {
            auto answer = prompt_field(req, "Answer: ");
            resp.content = "answer: " + answer +
                           "\nreasoning: the evidence text states this directly\n"
                           "is_hallucinated: false";
        }
        return ChatResult::success(resp);
    };
}

}  // namespace

TEST_CASE("normalize: surface forms collapse") {
    CHECK(normalize("  Melih   G\xc3\xb6k\xc3\xa7""ek. ") == normalize("melih g\xc3\xb6k\xc3\xa7""ek"));
    CHECK(normalize("\"Ankara\"") == "ankara");
    CHECK(normalize("San Francisco Symphony") == "san francisco symphony");
    CHECK(normalize("A") != normalize("B"));
    CHECK(normalize("") == "");
    CHECK(normalize("...") == "");
}

TEST_CASE("validate: invariant violations are named") {
    PerturbedRecord r;
    r.sample_id = "s";
    r.branch = Branch::perturbed;
    r.gold_answer = "Ankara";
    r.answer = "ankara!";  // same after normalization
    r.is_hallucinated = false;
    r.reasoning = "";
    auto v = validate(r);
    CHECK(std::count(v.begin(), v.end(), "empty reasoning") == 1);
    CHECK(std::count(v.begin(), v.end(), "perturbed not labeled hallucinated") == 1);
    CHECK(std::count(v.begin(), v.end(), "perturbed equals gold") == 1);

    r.reasoning = "swapped";
    r.is_hallucinated = true;
    r.answer = "Istanbul";
    CHECK(validate(r).empty());

    r.branch = Branch::verified;
    r.answer = r.gold_answer;
    r.is_hallucinated = false;
    CHECK(validate(r).empty());
}

TEST_CASE("branch assigner: deterministic, Bernoulli, skips unanswerable") {
    auto s = make_sample("a", "q", "a", {{"", "p"}});
    auto u = make_sample("u", "q", "", {{"", "p"}}, /*answerable=*/false);

    BranchAssigner a1(7), a2(7), a3(8);
    std::vector<Branch> seq1, seq2, seq3;
    for (int i = 0; i < 50; ++i) {
        seq1.push_back(*a1.assign(s, 0.5));
        seq2.push_back(*a2.assign(s, 0.5));
        seq3.push_back(*a3.assign(s, 0.5));
    }
    CHECK(seq1 == seq2);
    CHECK(seq1 != seq3);  // overwhelmingly likely for 50 draws

    BranchAssigner b(1);
    CHECK_FALSE(b.assign(u, 0.5).has_value());
    CHECK(*b.assign(s, 0.0) == Branch::verified);
    CHECK(*b.assign(s, 1.0) == Branch::perturbed);
    CHECK_THROWS_AS(b.assign(s, 1.5), std::invalid_argument);
}

TEST_CASE("branch assigner: p_halu=0.5 fraction over 10000 draws") {
    auto s = make_sample("a", "q", "a", {{"", "p"}});
    BranchAssigner assigner(1234);
    int perturbed = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        if (*assigner.assign(s, 0.5) == Branch::perturbed) ++perturbed;
    double fraction = static_cast<double>(perturbed) / n;
    CHECK(fraction > 0.48);
    CHECK(fraction < 0.52);
}

TEST_CASE("make_record: verified branch keeps the gold answer") {
    auto s = testutil::keles_sample();
    auto result = make_record(s, Branch::verified,
                              "answer: Melih G\xc3\xb6k\xc3\xa7\x65k\n"
                              "reasoning: stated in the evidence\n"
                              "is_hallucinated: false");
    REQUIRE(std::holds_alternative<PerturbedRecord>(result));
    const auto& rec = std::get<PerturbedRecord>(result);
    CHECK(rec.answer == s.answer);
    CHECK(rec.gold_answer == s.answer);
    CHECK_FALSE(rec.is_hallucinated);
    CHECK(rec.branch == Branch::verified);
    CHECK(rec.context.find("pistol events") != std::string::npos);
}

TEST_CASE("make_record: verifier disagreeing flags the record") {
    auto s = testutil::keles_sample();
    auto result = make_record(s, Branch::verified,
                              "answer: Melih G\xc3\xb6k\xc3\xa7\x65k\n"
                              "reasoning: the evidence contradicts this\n"
                              "is_hallucinated: true");
    REQUIRE(std::holds_alternative<PerturbedRecord>(result));
    CHECK(std::get<PerturbedRecord>(result).is_hallucinated);
}

TEST_CASE("make_record: perturbed branch rejects an unchanged answer") {
    auto s = testutil::tepuka_sample();
    auto reply = [](const std::string& perturbed) {
        return "answer: \xc3\x81lvaro de Menda\xc3\xb1\x61\n"
               "hallucinated_answer: " + perturbed + "\n"
               "reasoning: changed the navigator\n"
               "is_hallucinated: true";
    };
    auto good = make_record(s, Branch::perturbed, reply("Ferdinand Magellan"));
    REQUIRE(std::holds_alternative<PerturbedRecord>(good));
    const auto& rec = std::get<PerturbedRecord>(good);
    CHECK(rec.answer == "Ferdinand Magellan");
    CHECK(rec.is_hallucinated);
    CHECK(rec.gold_answer == s.answer);

    auto same = make_record(s, Branch::perturbed, reply("  \"\xc3\x81lvaro   de Menda\xc3\xb1\x61.\""));
    REQUIRE(std::holds_alternative<std::vector<std::string>>(same));
    auto violations = std::get<std::vector<std::string>>(same);
    CHECK(std::count(violations.begin(), violations.end(), "perturbed equals gold") == 1);

    auto unlabeled = make_record(s, Branch::perturbed,
                                 "answer: x\nhallucinated_answer: y\nreasoning: z\n"
                                 "is_hallucinated: false");
    REQUIRE(std::holds_alternative<std::vector<std::string>>(unlabeled));

    auto garbled = make_record(s, Branch::perturbed, "total nonsense");
    REQUIRE(std::holds_alternative<std::vector<std::string>>(garbled));
}

TEST_CASE("perturb_one: retries within budget, rejects after") {
    auto s = testutil::keles_sample();

    SUBCASE("bad reply then good reply") {
        ScriptedGateway gw;
        gw.push_reply("nonsense");
        gw.push_reply("answer: a\nreasoning: fine\nis_hallucinated: false");
        auto out = perturb_one(s, Branch::verified, gw, 3, "m");
        CHECK(std::holds_alternative<PerturbedRecord>(out));
        CHECK(gw.call_count() == 2);
    }

    SUBCASE("budget exhausted") {
        ScriptedGateway gw([](const ChatRequest&) {
            ChatResponse r;
            r.content = "nonsense";
            return ChatResult::success(r);
        });
        auto out = perturb_one(s, Branch::verified, gw, 3, "m");
        REQUIRE(std::holds_alternative<RecordRejected>(out));
        const auto& rej = std::get<RecordRejected>(out);
        CHECK(rej.sample_id == s.id);
        CHECK(rej.attempts == 3);
        CHECK(rej.violations.size() == 3);
        CHECK(gw.call_count() == 3);
    }

    SUBCASE("transport failure propagates") {
        ScriptedGateway gw;
        gw.push_error(GatewayError::Kind::transport_exhausted, "down");
        auto out = perturb_one(s, Branch::verified, gw, 3, "m");
        CHECK(std::holds_alternative<TransportFailure>(out));
    }
}

TEST_CASE("build_dataset: conservation and determinism") {
    std::vector<halueval::corpus::QASample> samples;
    for (int i = 0; i < 30; ++i)
        samples.push_back(make_sample("s" + std::to_string(i), "q" + std::to_string(i),
                                      "gold" + std::to_string(i), {{"", "evidence text here"}}));
    samples.push_back(make_sample("unanswerable", "q", "", {{"", "p"}}, false));

    ScriptedGateway gw(cooperative_model());
    PerturbConfig cfg;
    cfg.seed = 5;
    halueval::corpus::BasicTokenizer tok;
    auto result = build_dataset(samples, gw, cfg, tok);

    CHECK_FALSE(result.failed);
    CHECK(result.skipped == 1);
    CHECK(result.records.size() + result.quarantined.size() + result.rejects.size() +
              result.skipped == samples.size());
    CHECK(result.stats.total == result.records.size());
    CHECK(result.stats.hallucinated_fraction + result.stats.non_hallucinated_fraction ==
          doctest::Approx(1.0));

    // same seed, same corpus: byte-identical record stream
    ScriptedGateway gw2(cooperative_model());
    auto again = build_dataset(samples, gw2, cfg, tok);
    REQUIRE(again.records.size() == result.records.size());
    for (size_t i = 0; i < result.records.size(); ++i)
        CHECK(to_json(again.records[i]).dump() == to_json(result.records[i]).dump());
}

TEST_CASE("build_dataset: verifier disagreement goes to quarantine") {
    auto samples = std::vector<halueval::corpus::QASample>{
        make_sample("only", "q", "gold", {{"", "p"}})};
    ScriptedGateway gw([](const ChatRequest& req) {
        ChatResponse r;
        if (is_hallucination_prompt(req))
            r.content = "answer: gold\nhallucinated_answer: fake\nreasoning: r\n"
                        "is_hallucinated: true";
        else
            r.content = "answer: gold\nreasoning: the evidence contradicts the gold answer\n"
                        "is_hallucinated: true";
        return ChatResult::success(r);
    });
    PerturbConfig cfg;
    cfg.p_halu = 0.0;  // force the verified branch
    halueval::corpus::BasicTokenizer tok;
    auto result = build_dataset(samples, gw, cfg, tok);
    CHECK(result.records.empty());
    CHECK(result.quarantined.size() == 1);
    CHECK(result.failed);  // nothing accepted
}

TEST_CASE("build_dataset: reject fraction limit trips failure") {
    std::vector<halueval::corpus::QASample> samples;
    for (int i = 0; i < 10; ++i)
        samples.push_back(
            make_sample("s" + std::to_string(i), "q" + std::to_string(i), "gold", {{"", "p"}}));
    // two of the ten samples get garbage replies forever
    ScriptedGateway gw([](const ChatRequest& req) {
        ChatResponse r;
        const auto& text = req.messages.back().content;
        bool garbage = text.find("Question: q0\n") != std::string::npos ||
                       text.find("Question: q1\n") != std::string::npos;
        if (garbage) {
            r.content = "nonsense";
        } else if (is_hallucination_prompt(req)) {
            r.content = "answer: gold\nhallucinated_answer: fake\nreasoning: r\n"
                        "is_hallucinated: true";
        } else {
            r.content = "answer: gold\nreasoning: r\nis_hallucinated: false";
        }
        return ChatResult::success(r);
    });
    PerturbConfig cfg;
    cfg.reject_fraction_limit = 0.1;
    halueval::corpus::BasicTokenizer tok;
    auto result = build_dataset(samples, gw, cfg, tok);
    CHECK(result.rejects.size() == 2);
    CHECK(result.failed);
    CHECK(result.failure.find("reject fraction") != std::string::npos);
}

TEST_CASE("record JSONL round-trip") {
    auto dir = testutil::temp_dir("perturb");
    std::vector<PerturbedRecord> records;
    for (int i = 0; i < 5; ++i) {
        PerturbedRecord r;
        r.sample_id = "s" + std::to_string(i);
        r.question = "q?";
        r.context = "ctx with\nnewline";
        r.answer = "a" + std::to_string(i);
        r.reasoning = "because";
        r.is_hallucinated = i % 2 == 0;
        r.gold_answer = "gold";
        r.branch = i % 2 == 0 ? Branch::perturbed : Branch::verified;
        records.push_back(r);
    }
    auto path = (dir / "records.jsonl").string();
    write_records(records, path);
    auto loaded = read_records(path);
    REQUIRE(loaded.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i)
        CHECK(to_json(loaded[i]).dump() == to_json(records[i]).dump());
}

TEST_CASE("stats_over: exact small case") {
    halueval::corpus::BasicTokenizer tok;
    PerturbedRecord a;
    a.context = "one two three four";  // 4 tokens
    a.reasoning = "x y";               // 2 tokens
    a.is_hallucinated = true;
    PerturbedRecord b = a;
    b.context = "one two";  // 2 tokens
    b.reasoning = "x";      // 1 token
    b.is_hallucinated = false;
    auto s = stats_over({a, b}, tok);
    CHECK(s.total == 2);
    CHECK(s.hallucinated_fraction == 0.5);
    CHECK(s.non_hallucinated_fraction == 0.5);
    CHECK(s.avg_context_tokens == 3.0);
    CHECK(s.avg_reasoning_tokens == 1.5);
}

TEST_CASE("export formats and training config") {
    auto dir = testutil::temp_dir("export");
    PerturbedRecord r;
    r.sample_id = "s";
    r.question = "q?";
    r.context = "ctx";
    r.answer = "ans";
    r.reasoning = "why";
    r.is_hallucinated = true;
    r.gold_answer = "gold";
    r.branch = Branch::perturbed;

    auto train = (dir / "train.jsonl").string();
    auto cfgp = (dir / "training_config.json").string();

    auto result = export_finetune({r, r}, ExportFormat::instruction_pairs, train, cfgp);
    CHECK(result.examples == 2);
    {
        std::istringstream in(testutil::read_file(train));
        std::string line;
        REQUIRE(std::getline(in, line));
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("instruction"));
        CHECK(j["output"] == "answer: ans\nreasoning: why\nis_hallucinated: true");
        CHECK(j["instruction"].get<std::string>().find("ctx") != std::string::npos);
    }

    export_finetune({r}, ExportFormat::conversation_pairs, train, cfgp);
    {
        auto j = nlohmann::json::parse(testutil::read_file(train));
        REQUIRE(j["messages"].size() == 2);
        CHECK(j["messages"][0]["role"] == "user");
        CHECK(j["messages"][1]["role"] == "assistant");
    }

    auto cfg = nlohmann::json::parse(testutil::read_file(cfgp));
    CHECK(cfg["warmup_steps"] == 100);
    CHECK(cfg["weight_decay"] == 0.1);
    CHECK(cfg["per_device_train_batch_size"] == 4);
    CHECK(cfg["gradient_accumulation_steps"] == 4);
    CHECK(cfg["ddp_timeout"] == 9000);
    CHECK(cfg["learning_rate"] == 5e-6);
    CHECK(cfg["lr_scheduler_type"] == "cosine");
    CHECK(cfg["num_train_epochs"] == 3);
    CHECK(cfg["bf16"] == true);

    CHECK(parse_export_format("instruction_pairs") == ExportFormat::instruction_pairs);
    CHECK(parse_export_format("conversation_pairs") == ExportFormat::conversation_pairs);
    CHECK_FALSE(parse_export_format("csv").has_value());
}
