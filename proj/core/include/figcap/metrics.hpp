#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace figcap::metrics {

/// Token sequence produced by tokenize(). All metric functions expect their
/// inputs to come from the canonical tokenizer so scores are comparable.
using TokenSeq = std::vector<std::string>;

/// Canonical tokenizer: lowercase, split on whitespace, every punctuation
/// character detached as its own token. "Fig. 3: loss" -> fig . 3 : loss
TokenSeq tokenize(std::string_view text);

/// Cumulative BLEU-k (k in 1..4) against a single reference.
///
///   BLEU_k = BP * exp((1/k) * sum_{n=1..k} log p_n)
///
/// p_n are clipped n-gram precisions; BP = min(1, exp(1 - r/c)). An empty
/// candidate scores 0 by definition, as does a candidate too short to form
/// any n-gram of some order n <= k. When p_n = 0 for n >= 2 it is smoothed
/// to 1 / (2 * |candidate n-grams|); p_1 = 0 yields 0 outright.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int k);

/// BLEU with bookkeeping for property tests and reports.
struct BleuDetail {
    double value = 0.0;
    bool smoothed = false;   // some p_n (n >= 2) was zero and got smoothed
    bool degenerate = false; // empty candidate or no n-grams of some order
};
BleuDetail bleu_detail(const TokenSeq& candidate, const TokenSeq& reference, int k);

struct Rouge {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// ROUGE-N with clipped (multiplicity-aware) n-gram overlap.
Rouge rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n);

/// ROUGE-L: P = LCS/|cand|, R = LCS/|ref|, F1 the harmonic mean.
Rouge rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

/// Length of the longest common subsequence.
std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

/// Spearman rank correlation: Pearson correlation of average ranks, ties
/// share the mean rank. Throws InvalidArgumentError on length mismatch or
/// fewer than 2 pairs, DegenerateInputError when either side has zero rank
/// variance.
double spearman(std::span<const double> a, std::span<const double> b);

/// K x K pair-count matrix over 1-based scores.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int levels);

    int levels() const { return levels_; }
    long long at(int a, int b) const; // 1-based scores
    long long& at(int a, int b);
    long long total() const;
    long long row_sum(int a) const;
    long long col_sum(int b) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int levels_;
    std::vector<long long> cells_; // row-major
};

/// Cell (i, j) counts pairs with a = i and b = j. Scores must lie in
/// 1..levels; out-of-range throws InvalidArgumentError.
ConfusionMatrix confusion(std::span<const int> a, std::span<const int> b, int levels);

/// Quadratic Weighted Kappa with weights (i-j)^2 / (levels-1)^2 and expected
/// counts from the outer product of marginals. Throws DegenerateInputError
/// when the expected weighted disagreement is zero (both raters constant).
double qwk(std::span<const int> a, std::span<const int> b, int levels);

/// The seven per-pair scores reported in the experiment tables.
struct SampleScores {
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double bleu3 = 0.0;
    double bleu4 = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rouge_l = 0.0;
};

/// All seven metrics for one candidate/reference pair.
SampleScores score_pair(const TokenSeq& candidate, const TokenSeq& reference);

/// Macro-averaged metrics over n scored pairs.
struct MetricReport {
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double bleu3 = 0.0;
    double bleu4 = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rouge_l = 0.0;
    std::size_t n = 0;

    bool operator==(const MetricReport&) const = default;
};

/// Arithmetic mean per metric; an empty list yields all zeros with n = 0.
MetricReport aggregate(std::span<const SampleScores> per_pair);

/// Spearman + QWK + confusion matrix between two raters on a 1..6 scale.
struct AgreementReport {
    double spearman = 0.0;
    double qwk = 0.0;
    ConfusionMatrix confusion{6};
};

} // namespace figcap::metrics
