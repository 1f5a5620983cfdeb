#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halueval::corpus {

struct QASample;

/// Pluggable token counter. The reported counts are approximate unless a
/// vocabulary matching the producing model is loaded.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
    virtual size_t count(std::string_view text) const { return tokenize(text).size(); }
    virtual std::string name() const = 0;
};

/// Default tokenizer: runs of alphanumeric bytes (UTF-8 continuation bytes
/// treated as word characters) form one token; every other printable
/// character is its own token.
class BasicTokenizer : public Tokenizer {
public:
    std::vector<std::string> tokenize(std::string_view text) const override;
    size_t count(std::string_view text) const override;
    std::string name() const override { return "basic"; }
};

/// Greedy longest-match tokenizer over a vocabulary file (one entry per
/// line). Words are first split on whitespace, then matched against the
/// vocabulary; unmatched prefixes fall back to single bytes.
class VocabTokenizer : public Tokenizer {
public:
    static VocabTokenizer load(const std::string& path);
    explicit VocabTokenizer(std::vector<std::string> vocab);
    std::vector<std::string> tokenize(std::string_view text) const override;
    std::string name() const override { return "vocab"; }

private:
    std::vector<std::string> vocab_;  // sorted
    size_t max_entry_ = 0;
};

size_t context_tokens(const QASample& sample, const Tokenizer& tok);

struct LengthDistribution {
    // bucket lower bound -> frequency; bucket is [lb, lb + bucket_width)
    std::map<long, long> histogram;
    long bucket_width = 1;
    size_t count = 0;
    std::optional<double> mean;
    std::optional<double> median;
    long max = 0;
};

LengthDistribution distribution(const std::vector<QASample>& samples, const Tokenizer& tok,
                                long bucket_width);

// Serial reference for the parallel kernel above; identical results.
LengthDistribution distribution_serial(const std::vector<QASample>& samples, const Tokenizer& tok,
                                       long bucket_width);

LengthDistribution distribution_from_counts(const std::vector<long>& counts, long bucket_width);

}  // namespace halueval::corpus
