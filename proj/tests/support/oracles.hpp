#pragma once

// Brute-force reference implementations used to cross-check the metrics
// library. These deliberately avoid the library's data structures: n-grams
// are compared positionally (no hash maps), LCS is memoized recursion (not
// the rolling DP), ranks come from an explicit O(n^2) rank table, and QWK
// evaluates its defining formula over full matrices. Keep them independent
// of core/src/metrics.cpp.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

inline bool gram_equal(const Seq& a, std::size_t i, const Seq& b, std::size_t j, int n) {
    for (int t = 0; t < n; ++t)
        if (a[i + static_cast<std::size_t>(t)] != b[j + static_cast<std::size_t>(t)])
            return false;
    return true;
}

inline long long count_gram(const Seq& seq, const Seq& gram_src, std::size_t pos, int n) {
    if (seq.size() < static_cast<std::size_t>(n))
        return 0;
    long long count = 0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i)
        if (gram_equal(seq, i, gram_src, pos, n))
            ++count;
    return count;
}

inline long long clipped_matches(const Seq& cand, const Seq& ref, int n) {
    if (cand.size() < static_cast<std::size_t>(n))
        return 0;
    long long total = 0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= cand.size(); ++i) {
        bool first_occurrence = true;
        for (std::size_t j = 0; j < i; ++j) {
            if (gram_equal(cand, j, cand, i, n)) {
                first_occurrence = false;
                break;
            }
        }
        if (!first_occurrence)
            continue;
        const long long in_cand = count_gram(cand, cand, i, n);
        const long long in_ref = count_gram(ref, cand, i, n);
        total += std::min(in_cand, in_ref);
    }
    return total;
}

inline double bleu(const Seq& cand, const Seq& ref, int k) {
    if (cand.empty())
        return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= k; ++n) {
        if (cand.size() < static_cast<std::size_t>(n))
            return 0.0;
        const auto total = static_cast<long long>(cand.size()) - n + 1;
        const long long matches = clipped_matches(cand, ref, n);
        double p;
        if (matches == 0) {
            if (n == 1)
                return 0.0;
            p = 1.0 / (2.0 * static_cast<double>(total));
        } else {
            p = static_cast<double>(matches) / static_cast<double>(total);
        }
        log_sum += std::log(p);
    }
    const auto c = static_cast<double>(cand.size());
    const auto r = static_cast<double>(ref.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / k);
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Prf rouge_n(const Seq& cand, const Seq& ref, int n) {
    const long long cand_total = cand.size() < static_cast<std::size_t>(n)
                                     ? 0
                                     : static_cast<long long>(cand.size()) - n + 1;
    const long long ref_total = ref.size() < static_cast<std::size_t>(n)
                                    ? 0
                                    : static_cast<long long>(ref.size()) - n + 1;
    const long long matches = clipped_matches(cand, ref, n);
    Prf out;
    if (cand_total > 0)
        out.precision = static_cast<double>(matches) / static_cast<double>(cand_total);
    if (ref_total > 0)
        out.recall = static_cast<double>(matches) / static_cast<double>(ref_total);
    if (out.precision + out.recall > 0)
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

inline std::size_t lcs_rec(const Seq& a, const Seq& b, std::size_t i, std::size_t j,
                           std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
    if (i == a.size() || j == b.size())
        return 0;
    const auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end())
        return it->second;
    std::size_t best;
    if (a[i] == b[j])
        best = 1 + lcs_rec(a, b, i + 1, j + 1, memo);
    else
        best = std::max(lcs_rec(a, b, i + 1, j, memo), lcs_rec(a, b, i, j + 1, memo));
    memo.emplace(key, best);
    return best;
}

inline std::size_t lcs(const Seq& a, const Seq& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    return lcs_rec(a, b, 0, 0, memo);
}

inline Prf rouge_l(const Seq& cand, const Seq& ref) {
    Prf out;
    if (cand.empty() || ref.empty())
        return out;
    const auto common = static_cast<double>(lcs(cand, ref));
    out.precision = common / static_cast<double>(cand.size());
    out.recall = common / static_cast<double>(ref.size());
    if (out.precision + out.recall > 0)
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

// rank_i = #smaller + (#equal + 1) / 2, from an explicit pairwise table.
inline std::vector<double> ranks(const std::vector<double>& values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::size_t smaller = 0;
        std::size_t equal = 0;
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (values[j] < values[i])
                ++smaller;
            else if (values[j] == values[i])
                ++equal;
        }
        out[i] = static_cast<double>(smaller) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return out;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const auto n = static_cast<double>(ra.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sx += ra[i];
        sy += rb[i];
        sxy += ra[i] * rb[i];
        sxx += ra[i] * ra[i];
        syy += rb[i] * rb[i];
    }
    const double num = n * sxy - sx * sy;
    const double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    return num / den;
}

inline double qwk(const std::vector<int>& a, const std::vector<int>& b, int levels) {
    std::vector<std::vector<double>> observed(
        static_cast<std::size_t>(levels), std::vector<double>(static_cast<std::size_t>(levels), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        observed[static_cast<std::size_t>(a[i] - 1)][static_cast<std::size_t>(b[i] - 1)] += 1.0;

    std::vector<double> row(static_cast<std::size_t>(levels), 0.0);
    std::vector<double> col(static_cast<std::size_t>(levels), 0.0);
    double total = 0.0;
    for (int i = 0; i < levels; ++i) {
        for (int j = 0; j < levels; ++j) {
            row[static_cast<std::size_t>(i)] += observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            col[static_cast<std::size_t>(j)] += observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            total += observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }

    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < levels; ++i) {
        for (int j = 0; j < levels; ++j) {
            const double w = static_cast<double>((i - j) * (i - j)) /
                             static_cast<double>((levels - 1) * (levels - 1));
            num += w * observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            den += w * row[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(j)] / total;
        }
    }
    return 1.0 - num / den;
}

} // namespace oracle
