#pragma once

#include <random>
#include <string>
#include <vector>

namespace testgen {

inline std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len = 8,
                                              int vocab = 5, std::size_t min_len = 0) {
    static const char* kVocab[] = {"a", "b", "c", "d", "e"};
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    std::uniform_int_distribution<int> tok_dist(0, vocab - 1);
    std::vector<std::string> out(len_dist(rng));
    for (auto& tok : out)
        tok = kVocab[tok_dist(rng)];
    return out;
}

inline std::vector<int> random_scores(std::mt19937_64& rng, std::size_t n, int levels = 6) {
    std::uniform_int_distribution<int> dist(1, levels);
    std::vector<int> out(n);
    for (auto& v : out)
        v = dist(rng);
    return out;
}

inline bool is_constant(const std::vector<int>& v) {
    for (const auto x : v)
        if (x != v.front())
            return false;
    return true;
}

/// Scores guaranteed to vary, so rank statistics are defined.
inline std::vector<int> random_scores_nonconstant(std::mt19937_64& rng, std::size_t n,
                                                  int levels = 6) {
    auto out = random_scores(rng, n, levels);
    while (is_constant(out))
        out = random_scores(rng, n, levels);
    return out;
}

} // namespace testgen
