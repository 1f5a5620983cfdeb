#include "halueval/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "halueval/corpus.hpp"
#include "halueval/prompts.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace halueval::corpus {

namespace {

inline bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

}  // namespace

std::vector<std::string> BasicTokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        unsigned char c = text[i];
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (is_word_byte(c)) {
            size_t j = i;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, text[i]);
            ++i;
        }
    }
    return out;
}

size_t BasicTokenizer::count(std::string_view text) const {
    size_t n = 0, i = 0;
    while (i < text.size()) {
        unsigned char c = text[i];
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        ++n;
        if (is_word_byte(c))
            while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        else
            ++i;
    }
    return n;
}

VocabTokenizer VocabTokenizer::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) vocab.push_back(line);
    }
    return VocabTokenizer(std::move(vocab));
}

VocabTokenizer::VocabTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
    std::sort(vocab_.begin(), vocab_.end());
    vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
    for (const auto& v : vocab_) max_entry_ = std::max(max_entry_, v.size());
}

std::vector<std::string> VocabTokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        // greedy longest vocabulary match at position i
        size_t limit = std::min(max_entry_, text.size() - i);
        size_t matched = 0;
        for (size_t len = limit; len >= 1; --len) {
            auto piece = text.substr(i, len);
            if (std::binary_search(vocab_.begin(), vocab_.end(), piece)) {
                matched = len;
                break;
            }
        }
        if (matched == 0) matched = 1;  // byte fallback
        out.emplace_back(text.substr(i, matched));
        i += matched;
    }
    return out;
}

size_t context_tokens(const QASample& sample, const Tokenizer& tok) {
    return tok.count(prompts::evidence_text(sample));
}

LengthDistribution distribution_from_counts(const std::vector<long>& counts, long bucket_width) {
    if (bucket_width <= 0) throw std::invalid_argument("bucket_width must be > 0");
    LengthDistribution d;
    d.bucket_width = bucket_width;
    d.count = counts.size();
    if (counts.empty()) return d;
    for (long c : counts) ++d.histogram[(c / bucket_width) * bucket_width];
    d.max = *std::max_element(counts.begin(), counts.end());
    d.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
    std::vector<long> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    d.median = (n % 2 == 1) ? static_cast<double>(sorted[n / 2])
                            : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    return d;
}

LengthDistribution distribution(const std::vector<QASample>& samples, const Tokenizer& tok,
                                long bucket_width) {
    if (bucket_width <= 0) throw std::invalid_argument("bucket_width must be > 0");
    std::vector<long> counts(samples.size(), 0);
    const long n = static_cast<long>(samples.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (long i = 0; i < n; ++i)
        counts[i] = static_cast<long>(context_tokens(samples[i], tok));
    return distribution_from_counts(counts, bucket_width);
}

LengthDistribution distribution_serial(const std::vector<QASample>& samples, const Tokenizer& tok,
                                       long bucket_width) {
    if (bucket_width <= 0) throw std::invalid_argument("bucket_width must be > 0");
    std::vector<long> counts;
    counts.reserve(samples.size());
    for (const auto& s : samples) counts.push_back(static_cast<long>(context_tokens(s, tok)));
    return distribution_from_counts(counts, bucket_width);
}

}  // namespace halueval::corpus
