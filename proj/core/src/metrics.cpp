#include "figcap/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "figcap/errors.hpp"

namespace figcap::metrics {

namespace {

// Joins tokens [i, i+n) with '\x1f' so n-grams can live in a flat hash map.
std::string ngram_key(const TokenSeq& seq, std::size_t i, int n) {
    std::string key = seq[i];
    for (int j = 1; j < n; ++j) {
        key.push_back('\x1f');
        key += seq[i + static_cast<std::size_t>(j)];
    }
    return key;
}

std::unordered_map<std::string, long long> ngram_counts(const TokenSeq& seq, int n) {
    std::unordered_map<std::string, long long> counts;
    if (seq.size() < static_cast<std::size_t>(n))
        return counts;
    const std::size_t total = seq.size() - static_cast<std::size_t>(n) + 1;
    counts.reserve(total);
    for (std::size_t i = 0; i < total; ++i)
        ++counts[ngram_key(seq, i, n)];
    return counts;
}

// Clipped overlap: sum over candidate n-grams of min(count_cand, count_ref).
long long clipped_matches(const std::unordered_map<std::string, long long>& cand,
                          const std::unordered_map<std::string, long long>& ref) {
    long long matches = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end())
            matches += std::min(count, it->second);
    }
    return matches;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]])
            ++j;
        // Positions i..j hold ties; they share the mean of ranks i+1..j+1.
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

} // namespace

TokenSeq tokenize(std::string_view text) {
    TokenSeq tokens;
    std::string current;
    for (const char ch : text) {
        const auto uc = static_cast<unsigned char>(ch);
        if (std::isspace(uc)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else if (std::ispunct(uc)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            tokens.emplace_back(1, ch);
        } else {
            current.push_back(static_cast<char>(std::tolower(uc)));
        }
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

BleuDetail bleu_detail(const TokenSeq& candidate, const TokenSeq& reference, int k) {
    if (k < 1 || k > 4)
        throw InvalidArgumentError("BLEU order must be in 1..4, got " + std::to_string(k));

    BleuDetail detail;
    if (candidate.empty()) {
        detail.degenerate = true;
        return detail;
    }

    double log_sum = 0.0;
    for (int n = 1; n <= k; ++n) {
        if (candidate.size() < static_cast<std::size_t>(n)) {
            detail.degenerate = true;
            detail.value = 0.0;
            return detail;
        }
        const auto cand_counts = ngram_counts(candidate, n);
        const auto ref_counts = ngram_counts(reference, n);
        const auto total = static_cast<long long>(candidate.size()) - n + 1;
        const long long matches = clipped_matches(cand_counts, ref_counts);

        double precision;
        if (matches == 0) {
            if (n == 1)
                return detail; // value 0, nothing to smooth at order 1
            precision = 1.0 / (2.0 * static_cast<double>(total));
            detail.smoothed = true;
        } else {
            precision = static_cast<double>(matches) / static_cast<double>(total);
        }
        log_sum += std::log(precision);
    }

    const auto c = static_cast<double>(candidate.size());
    const auto r = static_cast<double>(reference.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    detail.value = bp * std::exp(log_sum / static_cast<double>(k));
    return detail;
}

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int k) {
    return bleu_detail(candidate, reference, k).value;
}

Rouge rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
    if (n < 1)
        throw InvalidArgumentError("ROUGE-N order must be >= 1");

    const auto cand_counts = ngram_counts(candidate, n);
    const auto ref_counts = ngram_counts(reference, n);
    const long long cand_total =
        candidate.size() < static_cast<std::size_t>(n)
            ? 0
            : static_cast<long long>(candidate.size()) - n + 1;
    const long long ref_total = reference.size() < static_cast<std::size_t>(n)
                                    ? 0
                                    : static_cast<long long>(reference.size()) - n + 1;
    const long long matches = clipped_matches(cand_counts, ref_counts);

    Rouge out;
    out.precision = cand_total == 0 ? 0.0
                                    : static_cast<double>(matches) / static_cast<double>(cand_total);
    out.recall = ref_total == 0 ? 0.0
                                : static_cast<double>(matches) / static_cast<double>(ref_total);
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    if (a.empty() || b.empty())
        return 0;
    // Two-row DP over positions of a (rows) and b (columns).
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> curr(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1])
                curr[j] = prev[j - 1] + 1;
            else
                curr[j] = std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

Rouge rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
    Rouge out;
    if (candidate.empty() || reference.empty())
        return out;
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    out.precision = lcs / static_cast<double>(candidate.size());
    out.recall = lcs / static_cast<double>(reference.size());
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw InvalidArgumentError("spearman: input lengths differ");
    if (a.size() < 2)
        throw InvalidArgumentError("spearman: need at least 2 pairs");

    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const auto n = static_cast<double>(ra.size());

    const double mean_a = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mean_b = std::accumulate(rb.begin(), rb.end(), 0.0) / n;

    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const double da = ra[i] - mean_a;
        const double db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0)
        throw DegenerateInputError("spearman: zero rank variance (constant input)");
    return cov / std::sqrt(var_a * var_b);
}

ConfusionMatrix::ConfusionMatrix(int levels) : levels_(levels) {
    if (levels < 1)
        throw InvalidArgumentError("confusion matrix needs at least 1 level");
    cells_.assign(static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels), 0);
}

long long ConfusionMatrix::at(int a, int b) const {
    if (a < 1 || a > levels_ || b < 1 || b > levels_)
        throw InvalidArgumentError("confusion cell out of range");
    return cells_[static_cast<std::size_t>(a - 1) * static_cast<std::size_t>(levels_) +
                  static_cast<std::size_t>(b - 1)];
}

long long& ConfusionMatrix::at(int a, int b) {
    if (a < 1 || a > levels_ || b < 1 || b > levels_)
        throw InvalidArgumentError("confusion cell out of range");
    return cells_[static_cast<std::size_t>(a - 1) * static_cast<std::size_t>(levels_) +
                  static_cast<std::size_t>(b - 1)];
}

long long ConfusionMatrix::total() const {
    return std::accumulate(cells_.begin(), cells_.end(), 0LL);
}

long long ConfusionMatrix::row_sum(int a) const {
    long long sum = 0;
    for (int b = 1; b <= levels_; ++b)
        sum += at(a, b);
    return sum;
}

long long ConfusionMatrix::col_sum(int b) const {
    long long sum = 0;
    for (int a = 1; a <= levels_; ++a)
        sum += at(a, b);
    return sum;
}

ConfusionMatrix confusion(std::span<const int> a, std::span<const int> b, int levels) {
    if (a.size() != b.size())
        throw InvalidArgumentError("confusion: input lengths differ");
    ConfusionMatrix matrix(levels);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 1 || a[i] > levels || b[i] < 1 || b[i] > levels)
            throw InvalidArgumentError("confusion: score out of range 1.." +
                                       std::to_string(levels));
        ++matrix.at(a[i], b[i]);
    }
    return matrix;
}

double qwk(std::span<const int> a, std::span<const int> b, int levels) {
    if (a.size() != b.size())
        throw InvalidArgumentError("qwk: input lengths differ");
    if (a.empty())
        throw InvalidArgumentError("qwk: need at least 1 pair");
    if (levels < 2)
        throw InvalidArgumentError("qwk: need at least 2 levels");

    const ConfusionMatrix observed = confusion(a, b, levels);
    const auto n = static_cast<double>(observed.total());
    const double denom = static_cast<double>(levels - 1) * static_cast<double>(levels - 1);

    double weighted_observed = 0.0;
    double weighted_expected = 0.0;
    for (int i = 1; i <= levels; ++i) {
        for (int j = 1; j <= levels; ++j) {
            const double w = static_cast<double>((i - j) * (i - j)) / denom;
            weighted_observed += w * static_cast<double>(observed.at(i, j));
            const double expected =
                static_cast<double>(observed.row_sum(i)) *
                static_cast<double>(observed.col_sum(j)) / n;
            weighted_expected += w * expected;
        }
    }
    if (weighted_expected == 0.0)
        throw DegenerateInputError("qwk: expected weighted disagreement is zero "
                                   "(both raters constant)");
    return 1.0 - weighted_observed / weighted_expected;
}

SampleScores score_pair(const TokenSeq& candidate, const TokenSeq& reference) {
    SampleScores s;
    s.bleu1 = bleu(candidate, reference, 1);
    s.bleu2 = bleu(candidate, reference, 2);
    s.bleu3 = bleu(candidate, reference, 3);
    s.bleu4 = bleu(candidate, reference, 4);
    s.rouge1 = rouge_n(candidate, reference, 1).f1;
    s.rouge2 = rouge_n(candidate, reference, 2).f1;
    s.rouge_l = rouge_l(candidate, reference).f1;
    return s;
}

MetricReport aggregate(std::span<const SampleScores> per_pair) {
    MetricReport report;
    report.n = per_pair.size();
    if (per_pair.empty())
        return report;
    for (const auto& s : per_pair) {
        report.bleu1 += s.bleu1;
        report.bleu2 += s.bleu2;
        report.bleu3 += s.bleu3;
        report.bleu4 += s.bleu4;
        report.rouge1 += s.rouge1;
        report.rouge2 += s.rouge2;
        report.rouge_l += s.rouge_l;
    }
    const auto n = static_cast<double>(report.n);
    report.bleu1 /= n;
    report.bleu2 /= n;
    report.bleu3 /= n;
    report.bleu4 /= n;
    report.rouge1 /= n;
    report.rouge2 /= n;
    report.rouge_l /= n;
    return report;
}

} // namespace figcap::metrics
