#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "metaens/score_cache.hpp"

namespace metaens {

// Bump when the pair-feature layout below changes; serialized models carry it
// and refuse to score states from a different layout.
constexpr int kFeatureLayoutVersion = 1;

constexpr size_t kPairFeatureDim = 20;
constexpr size_t kStateDim = 3 * kPairFeatureDim + 1;  // 61

// Top-k overlap size used by the similarity features and the selector's
// redundancy discount: 5% of N, floored at 10, capped at N.
size_t default_k_top(size_t n);

// |top_k(a) ∩ top_k(b)| / |top_k(a) ∪ top_k(b)|; top-k by descending score,
// ties by ascending index; k is clamped to N.
double jaccard_top_k(const std::vector<double>& a, const std::vector<double>& b, size_t k);

// Relationship descriptor of two equal-length score vectors (N >= 2).
// Layout (fixed, versioned):
//   0 Pearson r                     10 symmetrized KL, 10-bin joint-range hists
//   1 Spearman rho                  11 histogram intersection
//   2 Kendall tau-b                 12 mean(a) - mean(b)
//   3 cosine similarity             13 std(a) - std(b)
//   4 mean |a-b|                    14 entropy(a) - entropy(b)
//   5 rms(a-b)                      15 mean(b)
//   6 max |a-b|                     16 std(b)
//   7 Jaccard@top-1% (k floored 5)  17 skewness(b)
//   8 Jaccard@top-5% (k floored 5)  18 excess kurtosis(b)
//   9 Jaccard@top-10% (k floored 5) 19 entropy(b), 10-bin own-range hist
// The context tail (15..19) describes the second argument, which is the
// candidate side wherever a candidate is involved. Degenerate inputs follow
// fixed rules: zero-variance vectors give 0 correlations, zero-norm vectors
// give 0 cosine, constant vectors have entropy 0. Stds are population stds.
std::array<double, kPairFeatureDim> pair_features(const std::vector<double>& a,
                                                  const std::vector<double>& b);

struct StateFeatures {
    std::array<double, kPairFeatureDim> last_cand{};  // phi(f_last, f_cand)
    std::array<double, kPairFeatureDim> last_ens{};   // mean phi(f_last, f), f in P\{last}
    std::array<double, kPairFeatureDim> cand_ens{};   // mean phi(f, f_cand), f in P
    double ensemble_size = 0.0;

    std::array<double, kStateDim> to_vector() const;
};

// candidate must be outside the ensemble, last inside it, all ids present in
// the score matrix. Pooled blocks sum members in ascending-id order, so the
// result is bitwise independent of the caller's member ordering. With
// |P| = 1 the last_ens block stays zero-padded.
StateFeatures build_state(const ScoreMatrix& sm, const std::string& candidate_id,
                          const std::string& last_id,
                          const std::vector<std::string>& ensemble_ids, size_t k_top);

}  // namespace metaens
