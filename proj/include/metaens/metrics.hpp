#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace metaens {

// All ranking metrics share one tie rule: items are ordered by descending
// score, ties broken by ascending original index. Labels must contain both
// classes and scores must be finite; violations throw DataError.

// Mean over positives of precision at each positive's rank.
double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels);

enum class AucTies {
    HALF_CREDIT,  // tied positive/negative pairs count 0.5 (default)
    STRICT,       // tied pairs count 0
};

double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
               AucTies ties = AucTies::HALF_CREDIT);

// Precision among the top-pi ranked items, pi = number of positives.
double precision_at_pi(const std::vector<double>& scores,
                       const std::vector<uint8_t>& labels);

// Max F1 over thresholds tau at the distinct score values, prediction rule
// y_hat = (score >= tau).
double max_f1(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// One-sided Wilcoxon signed-rank p-value, alternative "median > 0".
// Zero differences are dropped (all-zero input is an error). Exact p from the
// 2^n null distribution (dynamic program over rank subsets) when n <= 25 and
// |d| has no ties; otherwise normal approximation with tie correction and a
// 0.5 continuity correction.
double wilcoxon_signed_rank(const std::vector<double>& diffs);

// ap[m][d] = AP of method m on dataset d. Per dataset, methods get dense
// ranks by descending AP (1 = best, ties averaged); returns the mean rank per
// method. All rows must have equal, nonzero length.
std::vector<double> average_ranks(const std::vector<std::vector<double>>& ap);

struct EvalReport {
    size_t n = 0;
    size_t n_anomalies = 0;
    double ap = 0.0;
    double roc_auc = 0.0;
    double precision_at_pi = 0.0;
    double max_f1 = 0.0;
};

EvalReport evaluate_scores(const std::vector<double>& scores,
                           const std::vector<uint8_t>& labels,
                           AucTies ties = AucTies::HALF_CREDIT);

}  // namespace metaens
