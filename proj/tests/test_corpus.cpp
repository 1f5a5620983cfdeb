#include <doctest.h>

#include <algorithm>
#include <random>

#include "halueval/corpus.hpp"
#include "halueval/tokenizer.hpp"
#include "helpers.hpp"

using namespace halueval::corpus;
using testutil::make_sample;

TEST_CASE("load_musique: empty file") {
    auto dir = testutil::temp_dir("corpus");
    testutil::write_file(dir / "empty.jsonl", "");
    auto result = load_musique((dir / "empty.jsonl").string());
    CHECK(result.items.empty());
    CHECK(result.diagnostics.empty());
}

TEST_CASE("load_musique: multi-hop decomposition sample") {
    auto dir = testutil::temp_dir("corpus");
    testutil::write_file(dir / "keles.jsonl", testutil::musique_line(testutil::keles_sample()) + "\n");
    auto result = load_musique((dir / "keles.jsonl").string());
    REQUIRE(result.items.size() == 1);
    const auto& s = result.items[0];
    REQUIRE(s.decomposition.size() == 2);
    CHECK(s.decomposition[0].question == "What is the place of birth of İsmail Keleş?");
    CHECK(s.decomposition[0].answer == "Ankara");
    CHECK(s.decomposition[1].question == "Who was in charge of Ankara?");
    CHECK(s.decomposition[1].answer == "Melih Gökçek");
}

TEST_CASE("load_musique: truncated line is skipped with a diagnostic") {
    auto dir = testutil::temp_dir("corpus");
    auto valid = testutil::musique_line(testutil::keles_sample());
    auto truncated = valid.substr(0, valid.size() / 2);
    testutil::write_file(dir / "mixed.jsonl", valid + "\n" + truncated + "\n");
    auto result = load_musique((dir / "mixed.jsonl").string());
    CHECK(result.items.size() == 1);
    CHECK(result.diagnostics.size() == 1);
    CHECK(result.diagnostics[0].line == 2);
}

TEST_CASE("load_musique: duplicate ids and schema violations") {
    auto dir = testutil::temp_dir("corpus");
    auto line = testutil::musique_line(testutil::keles_sample());
    std::string no_answer =
        R"({"id":"x1","question":"q","paragraphs":[{"idx":0,"title":"t","paragraph_text":"p"}],"answer":"","answerable":true})";
    std::string empty_para =
        R"({"id":"x2","question":"q","paragraphs":[{"idx":0,"title":"t","paragraph_text":""}],"answer":"a"})";
    testutil::write_file(dir / "bad.jsonl", line + "\n" + line + "\n" + no_answer + "\n" + empty_para + "\n");
    auto result = load_musique((dir / "bad.jsonl").string());
    CHECK(result.items.size() == 1);
    CHECK(result.diagnostics.size() == 3);
}

TEST_CASE("load_musique: unanswerable sample kept with flag") {
    auto dir = testutil::temp_dir("corpus");
    std::string line =
        R"({"id":"u1","question":"q","paragraphs":[{"idx":0,"title":"t","paragraph_text":"p"}],"answer":"","answerable":false})";
    testutil::write_file(dir / "u.jsonl", line + "\n");
    auto result = load_musique((dir / "u.jsonl").string());
    REQUIRE(result.items.size() == 1);
    CHECK_FALSE(result.items[0].answerable);
}

TEST_CASE("load_musique: serialize/load round-trip") {
    auto dir = testutil::temp_dir("corpus");
    std::string content;
    std::vector<QASample> originals = {testutil::keles_sample(), testutil::tepuka_sample(),
                                       testutil::creeping_death_sample()};
    for (const auto& s : originals) content += testutil::musique_line(s) + "\n";
    testutil::write_file(dir / "rt.jsonl", content);
    auto loaded = load_musique((dir / "rt.jsonl").string());
    REQUIRE(loaded.items.size() == originals.size());
    std::string round_tripped;
    for (const auto& s : loaded.items) round_tripped += testutil::musique_line(s) + "\n";
    CHECK(round_tripped == content);
}

namespace {

std::string ragtruth_source(const std::string& id, const std::string& task,
                            const std::string& question, const std::string& passages) {
    nlohmann::json j;
    j["source_id"] = id;
    j["task_type"] = task;
    j["source_info"] = {{"question", question}, {"passages", passages}};
    return j.dump();
}

std::string ragtruth_response(const std::string& id, const std::string& source_id,
                              const std::string& model, const std::string& response,
                              const std::vector<std::tuple<long, long, std::string>>& labels) {
    nlohmann::json j;
    j["id"] = id;
    j["source_id"] = source_id;
    j["model"] = model;
    j["response"] = response;
    j["labels"] = nlohmann::json::array();
    for (const auto& [s, e, t] : labels)
        j["labels"].push_back({{"start", s}, {"end", e}, {"label_type", t}});
    return j.dump();
}

}  // namespace

TEST_CASE("load_ragtruth: join of 3 sources x 2 responses yields 6 cases") {
    auto dir = testutil::temp_dir("ragtruth");
    std::string src, resp;
    for (int i = 0; i < 3; ++i)
        src += ragtruth_source("s" + std::to_string(i), "QA", "q?", "passage text") + "\n";
    int case_n = 0;
    for (int i = 0; i < 3; ++i)
        for (const char* model : {"m1", "m2"})
            resp += ragtruth_response("r" + std::to_string(case_n++), "s" + std::to_string(i),
                                      model, "some response", {}) + "\n";
    testutil::write_file(dir / "src.jsonl", src);
    testutil::write_file(dir / "resp.jsonl", resp);
    auto result = load_ragtruth((dir / "src.jsonl").string(), (dir / "resp.jsonl").string());
    CHECK(result.items.size() == 6);
    CHECK(result.diagnostics.empty());
    for (const auto& c : result.items) CHECK_FALSE(c.hallucinated());
}

TEST_CASE("load_ragtruth: span validation") {
    auto dir = testutil::temp_dir("ragtruth");
    testutil::write_file(dir / "src.jsonl", ragtruth_source("s0", "QA", "q?", "ctx") + "\n");
    std::string resp =
        ragtruth_response("r0", "s0", "m", "héllo wörld", {{5, 3, "conflict"}}) + "\n" +
        ragtruth_response("r1", "s0", "m", "héllo", {{0, 5, "ok"}, {0, 6, "overrun"}}) + "\n" +
        ragtruth_response("r2", "missing", "m", "x", {}) + "\n";
    testutil::write_file(dir / "resp.jsonl", resp);
    auto result = load_ragtruth((dir / "src.jsonl").string(), (dir / "resp.jsonl").string());
    REQUIRE(result.items.size() == 2);
    // inverted span dropped, case kept and classified non-hallucinated
    CHECK(result.items[0].gold_spans.empty());
    // codepoint bounds: "héllo" has 5 scalars, end 5 ok, end 6 dropped
    CHECK(result.items[1].gold_spans.size() == 1);
    REQUIRE(result.diagnostics.size() == 3);
    CHECK(result.diagnostics[0].message.find("inverted span") != std::string::npos);
    CHECK(result.diagnostics[1].message.find("out-of-range") != std::string::npos);
    CHECK(result.diagnostics[2].message.find("dangling") != std::string::npos);
}

TEST_CASE("hallucinated iff gold spans non-empty") {
    RagTruthCase c;
    CHECK_FALSE(c.hallucinated());
    c.gold_spans.push_back({0, 1, "x"});
    CHECK(c.hallucinated());
}

TEST_CASE("context_tokens") {
    BasicTokenizer tok;
    QASample empty;
    empty.id = "e";
    CHECK(context_tokens(empty, tok) == 0);

    auto s = make_sample("one", "q", "a", {{"", "a b c"}});
    CHECK(context_tokens(s, tok) == 3);
}

TEST_CASE("context_tokens monotone under paragraph concatenation") {
    BasicTokenizer tok;
    std::mt19937_64 rng(7);
    auto s = make_sample("m", "q", "a", {});
    size_t prev = 0;
    for (int p = 0; p < 20; ++p) {
        std::string text;
        int words = static_cast<int>(rng() % 10);  // possibly empty text is fine here
        for (int w = 0; w <= words; ++w) text += "w" + std::to_string(w) + " ";
        s.paragraphs.push_back({p, "", text, false});
        size_t now = context_tokens(s, tok);
        CHECK(now >= prev);
        prev = now;
    }
}

TEST_CASE("distribution: small exact cases") {
    BasicTokenizer tok;
    auto ten = make_sample("a", "q", "a", {{"", "w w w w w w w w w w"}});
    auto dist = distribution({ten}, tok, 5);
    REQUIRE(dist.histogram.size() == 1);
    CHECK(dist.histogram.at(10) == 1);
    CHECK(dist.mean == 10.0);

    auto twenty = make_sample("b", "q", "a", {{"", std::string(
        "w w w w w w w w w w w w w w w w w w w w")}});
    auto dist2 = distribution({ten, twenty}, tok, 5);
    CHECK(dist2.mean == 15.0);
    CHECK(dist2.median == 15.0);
    CHECK(dist2.max == 20);
}

TEST_CASE("distribution: empty input flags mean as absent") {
    BasicTokenizer tok;
    auto d = distribution({}, tok, 5);
    CHECK(d.count == 0);
    CHECK_FALSE(d.mean.has_value());
    CHECK_FALSE(d.median.has_value());
    long total = 0;
    for (auto& [k, v] : d.histogram) total += v;
    CHECK(total == 0);
}

TEST_CASE("distribution: 100-sample fixture matches brute-force recount") {
    BasicTokenizer tok;
    std::mt19937_64 rng(11);
    std::vector<QASample> samples;
    for (int i = 0; i < 100; ++i) {
        std::string text;
        int words = 1 + static_cast<int>(rng() % 300);
        for (int w = 0; w < words; ++w) text += "x ";
        samples.push_back(make_sample("s" + std::to_string(i), "q", "a", {{"", text}}));
    }
    const long width = 32;
    auto dist = distribution(samples, tok, width);

    // independent recount
    std::map<long, long> expected_hist;
    double sum = 0;
    std::vector<long> counts;
    for (const auto& s : samples) {
        long c = static_cast<long>(context_tokens(s, tok));
        counts.push_back(c);
        sum += c;
        ++expected_hist[(c / width) * width];
    }
    CHECK(dist.histogram == expected_hist);
    REQUIRE(dist.mean.has_value());
    CHECK(*dist.mean == doctest::Approx(sum / samples.size()).epsilon(1e-12));

    long freq_total = 0;
    for (auto& [k, v] : dist.histogram) freq_total += v;
    CHECK(static_cast<size_t>(freq_total) == samples.size());

    // parallel kernel agrees with the serial reference exactly
    auto serial = distribution_serial(samples, tok, width);
    CHECK(serial.histogram == dist.histogram);
    CHECK(serial.mean == dist.mean);
    CHECK(serial.median == dist.median);
    CHECK(serial.max == dist.max);

    CHECK_THROWS(distribution(samples, tok, 0));
}

TEST_CASE("basic tokenizer splits punctuation") {
    BasicTokenizer tok;
    auto tokens = tok.tokenize("a, b.");
    REQUIRE(tokens.size() == 4);
    CHECK(tokens[0] == "a");
    CHECK(tokens[1] == ",");
    CHECK(tokens[2] == "b");
    CHECK(tokens[3] == ".");
    CHECK(tok.count("a, b.") == 4);
}

TEST_CASE("vocab tokenizer: greedy longest match with byte fallback") {
    VocabTokenizer tok({"hall", "hallucinat", "ion"});
    auto tokens = tok.tokenize("hallucination");
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0] == "hallucinat");  // longest match beats "hall"
    CHECK(tokens[1] == "ion");

    auto fallback = tok.tokenize("zzion");
    REQUIRE(fallback.size() == 3);  // two single-byte fallbacks, then "ion"
    CHECK(fallback[2] == "ion");
}

TEST_CASE("task type parsing") {
    CHECK(parse_task_type("QA") == TaskType::QA);
    CHECK(parse_task_type("Summary") == TaskType::Summary);
    CHECK(parse_task_type("Data2txt") == TaskType::Data2Txt);
    CHECK_FALSE(parse_task_type("other").has_value());
}
