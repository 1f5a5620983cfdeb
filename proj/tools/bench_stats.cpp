// Compares the parallel token-statistics kernel against the serial
// reference on a synthetic corpus and checks they agree.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "halueval/corpus.hpp"
#include "halueval/tokenizer.hpp"

using namespace halueval::corpus;

namespace {

std::vector<QASample> synthetic_corpus(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> n_paras(5, 30);
    std::uniform_int_distribution<int> n_words(40, 200);
    std::vector<QASample> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        QASample s;
        s.id = "s" + std::to_string(i);
        s.question = "who did what where";
        s.answer = "someone";
        int paras = n_paras(rng);
        for (int p = 0; p < paras; ++p) {
            Paragraph para;
            para.idx = p;
            para.title = "Title " + std::to_string(p);
            int words = n_words(rng);
            for (int w = 0; w < words; ++w) para.text += "word" + std::to_string(w % 17) + " ";
            s.paragraphs.push_back(std::move(para));
        }
        out.push_back(std::move(s));
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    size_t n = argc > 1 ? std::stoul(argv[1]) : 2000;
    auto samples = synthetic_corpus(n, 42);
    BasicTokenizer tok;

    auto t0 = std::chrono::steady_clock::now();
    auto serial = distribution_serial(samples, tok, 128);
    double serial_s = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto parallel = distribution(samples, tok, 128);
    double parallel_s = seconds_since(t0);

    bool equal = serial.histogram == parallel.histogram && serial.mean == parallel.mean &&
                 serial.median == parallel.median && serial.max == parallel.max;

    std::printf("samples:  %zu\n", n);
    std::printf("serial:   %.4f s\n", serial_s);
    std::printf("parallel: %.4f s\n", parallel_s);
    std::printf("speedup:  %.2fx\n", parallel_s > 0 ? serial_s / parallel_s : 0.0);
    std::printf("results:  %s\n", equal ? "identical" : "MISMATCH");
    return equal ? 0 : 1;
}
