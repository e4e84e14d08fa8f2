#include "metaens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaens/errors.hpp"

namespace metaens {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw DataError("metric: scores and labels differ in length");
    if (scores.empty()) throw DataError("metric: empty input");
    size_t pos = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError("metric: non-finite score");
        if (labels[i] > 1) throw DataError("metric: label not in {0,1}");
        pos += labels[i];
    }
    if (pos == 0 || pos == labels.size())
        throw DataError("metric: labels must contain both classes");
}

// Indices ordered by descending score, ascending index on ties.
std::vector<size_t> ranked_order(const std::vector<double>& scores) {
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels) {
    check_inputs(scores, labels);
    auto order = ranked_order(scores);
    size_t hits = 0;
    double sum = 0.0;
    for (size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(hits);
}

double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
               AucTies ties) {
    check_inputs(scores, labels);
    size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tie groups give the half-credit pair count directly;
    // strict mode subtracts the tied positive/negative pairs afterwards.
    size_t n_pos = 0;
    for (uint8_t l : labels) n_pos += l;
    size_t n_neg = n - n_pos;

    double rank_sum_pos = 0.0;
    double tied_pairs = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        size_t group_pos = 0;
        for (size_t t = i; t < j; ++t) group_pos += labels[idx[t]];
        rank_sum_pos += avg_rank * static_cast<double>(group_pos);
        tied_pairs += static_cast<double>(group_pos) * static_cast<double>(j - i - group_pos);
        i = j;
    }
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    if (ties == AucTies::STRICT) u -= 0.5 * tied_pairs;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double precision_at_pi(const std::vector<double>& scores,
                       const std::vector<uint8_t>& labels) {
    check_inputs(scores, labels);
    size_t pi = 0;
    for (uint8_t l : labels) pi += l;
    auto order = ranked_order(scores);
    size_t hits = 0;
    for (size_t k = 0; k < pi; ++k) hits += labels[order[k]];
    return static_cast<double>(hits) / static_cast<double>(pi);
}

double max_f1(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check_inputs(scores, labels);
    auto order = ranked_order(scores);
    size_t n_pos = 0;
    for (uint8_t l : labels) n_pos += l;

    double best = 0.0;
    size_t tp = 0;
    size_t k = 0;
    while (k < order.size()) {
        // Advance over a whole tie group: y_hat = (score >= tau) cannot split
        // items with equal scores.
        size_t j = k;
        while (j < order.size() && scores[order[j]] == scores[order[k]]) {
            tp += labels[order[j]];
            ++j;
        }
        double f1 = 2.0 * static_cast<double>(tp) /
                    static_cast<double>(j + n_pos);  // 2TP / (pred + pos)
        best = std::max(best, f1);
        k = j;
    }
    return best;
}

double wilcoxon_signed_rank(const std::vector<double>& diffs) {
    std::vector<double> d;
    for (double v : diffs) {
        if (!std::isfinite(v)) throw DataError("wilcoxon: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) throw DataError("wilcoxon: all differences are zero");
    size_t n = d.size();

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });

    std::vector<double> rank(n);
    bool has_ties = false;
    double tie_term = 0.0;  // sum of t^3 - t over tie groups
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && std::fabs(d[idx[j]]) == std::fabs(d[idx[i]])) ++j;
        double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (size_t t = i; t < j; ++t) rank[idx[t]] = avg;
        size_t t = j - i;
        if (t > 1) {
            has_ties = true;
            tie_term += static_cast<double>(t) * static_cast<double>(t * t - 1);
        }
        i = j;
    }

    double w_plus = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (d[k] > 0.0) w_plus += rank[k];

    if (n <= 25 && !has_ties) {
        // Ranks are exactly 1..n; count subsets with rank sum >= W+ by DP.
        size_t max_sum = n * (n + 1) / 2;
        std::vector<uint64_t> count(max_sum + 1, 0);
        count[0] = 1;
        for (size_t r = 1; r <= n; ++r)
            for (size_t s = max_sum; s >= r; --s) count[s] += count[s - r];
        uint64_t ge = 0;
        size_t w = static_cast<size_t>(std::llround(w_plus));
        for (size_t s = w; s <= max_sum; ++s) ge += count[s];
        return static_cast<double>(ge) / std::pow(2.0, static_cast<double>(n));
    }

    double nn = static_cast<double>(n);
    double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) throw DataError("wilcoxon: zero variance under ties");
    double z = (w_plus - mean - 0.5) / std::sqrt(var);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

std::vector<double> average_ranks(const std::vector<std::vector<double>>& ap) {
    if (ap.empty() || ap[0].empty()) throw DataError("average_ranks: empty table");
    size_t m = ap.size(), nd = ap[0].size();
    for (const auto& row : ap)
        if (row.size() != nd) throw DataError("average_ranks: ragged table");

    std::vector<double> mean_rank(m, 0.0);
    std::vector<size_t> idx(m);
    for (size_t dcol = 0; dcol < nd; ++dcol) {
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::sort(idx.begin(), idx.end(),
                  [&](size_t a, size_t b) { return ap[a][dcol] > ap[b][dcol]; });
        size_t i = 0;
        while (i < m) {
            size_t j = i;
            while (j < m && ap[idx[j]][dcol] == ap[idx[i]][dcol]) ++j;
            double avg = 0.5 * static_cast<double>(i + 1 + j);
            for (size_t t = i; t < j; ++t) mean_rank[idx[t]] += avg;
            i = j;
        }
    }
    for (double& r : mean_rank) r /= static_cast<double>(nd);
    return mean_rank;
}

EvalReport evaluate_scores(const std::vector<double>& scores,
                           const std::vector<uint8_t>& labels, AucTies ties) {
    EvalReport r;
    r.n = scores.size();
    for (uint8_t l : labels) r.n_anomalies += l;
    r.ap = average_precision(scores, labels);
    r.roc_auc = roc_auc(scores, labels, ties);
    r.precision_at_pi = precision_at_pi(scores, labels);
    r.max_f1 = max_f1(scores, labels);
    return r;
}

}  // namespace metaens
