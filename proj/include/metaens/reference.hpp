#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaens/dataset.hpp"
#include "metaens/metrics.hpp"
#include "metaens/score_cache.hpp"

// Deliberately naive re-implementations used to cross-check the production
// code and to give the kernel benchmark a serial baseline. Everything here is
// O(N^2) or worse, single-threaded, and written without shared helpers so a
// bug in the fast path cannot hide in both.
namespace metaens::ref {

// Ranking metrics by pair counting; no sorting, no cumulative sweeps.
double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels);
double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
               AucTies ties = AucTies::HALF_CREDIT);
double precision_at_pi(const std::vector<double>& scores,
                       const std::vector<uint8_t>& labels);
double max_f1(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// One-sided exact p by enumerating all 2^n sign assignments (n <= ~20).
double wilcoxon_exact(const std::vector<double>& diffs);

// Rank correlations by direct pairwise loops.
double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b);
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// Serial kNN / LOF baselines for the threading benchmark. Same distance and
// tie conventions as the parallel kernels (squared-distance comparisons,
// index tie-break), so outputs must match exactly.
std::vector<double> knn_scores(const Matrix& X, size_t k, const std::string& method);
std::vector<double> lof_scores(const Matrix& X, size_t k, bool manhattan);

// Greedy oracle rollout recomputed from raw columns every step: ensemble
// means are averaged directly over |P|+1 columns and AP comes from the
// pair-counting implementation above. Trajectory only.
std::vector<std::string> rollout_trajectory(const ScoreMatrix& sm,
                                            const std::vector<uint8_t>& labels, size_t eta);

}  // namespace metaens::ref
