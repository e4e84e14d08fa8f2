#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metaens/meta_model.hpp"
#include "metaens/score_cache.hpp"

namespace metaens {

enum class PrimaryStrategy { GLOBAL_BEST, FIXED, RANDOM };

struct PrimarySpec {
    PrimaryStrategy strategy = PrimaryStrategy::GLOBAL_BEST;
    std::string fixed_id;  // FIXED only
    uint64_t seed = 0;     // RANDOM only
};

// Label-free stage 0. GLOBAL_BEST = argmax of the model's meta-corpus mean AP
// over the available columns (ties ascending id); FIXED = the given id;
// RANDOM = uniform over the columns under the seed.
std::string primary_select(const ScoreMatrix& sm, const PrimarySpec& spec,
                           const std::map<std::string, double>& meta_perf);

// Redundancy discount gamma = 1/(1 + beta * sim_max), in (0, 1].
double discount(double beta, double sim_max);

// Marginal proxy utility gamma * (g_hat - lambda_fam * pi_f).
double proxy_utility(double g_hat, double gamma, double lambda_fam, double pi_f);

// Elementwise combine of equal-length member score vectors.
std::vector<double> aggregate(const std::vector<std::vector<double>>& member_scores,
                              Combiner combiner);

// One candidate evaluation, kept for every decision the selector makes so a
// run can be audited offline.
struct TraceRow {
    size_t step = 0;
    std::string candidate;
    double g_hat = 0.0;
    double sim_max = 0.0;
    double gamma = 1.0;
    double penalty = 0.0;   // lambda_fam * pi_F
    double delta_u = 0.0;
    bool accepted = false;
    std::string note;  // "primary", "tau1_gate", "below_tau2", "best", ""
};

struct SelectionResult {
    std::string dataset_id;
    std::vector<std::string> selected;  // in acceptance order
    std::vector<double> ensemble_scores;
    std::vector<TraceRow> trace;
    std::string stop_reason;  // "tau1_gate" | "no_positive_utility" | "budget" | "pool_exhausted"
    size_t k_top_used = 0;
};

// Algorithm: stage 0 primary; stage 1 gates on max predicted gain vs tau1
// (no discount or penalty yet) and otherwise admits the argmax; stage 2
// repeats while |P| < eta, skipping candidates with predicted gain < tau2 and
// accepting the best strictly positive discounted, risk-penalized utility.
// Candidates are the score-matrix columns (pool members plus any injected
// external columns); all ties break toward the ascending id.
SelectionResult select(const ScoreMatrix& sm, const ModelPool& pool,
                       const TwoPartGainModel& model, const ModelConfig& cfg,
                       const PrimarySpec& primary);

void write_selection_json(const SelectionResult& res, const ModelConfig& cfg,
                          const std::string& scores_path, const std::string& json_path);

void write_scores_csv(const std::vector<double>& scores, const std::string& path);

// Pairwise Jaccard@k_top of all columns, emitted as a square CSV with an id
// header for external plotting.
void dump_similarity_csv(const ScoreMatrix& sm, size_t k_top, const std::string& path);

}  // namespace metaens
