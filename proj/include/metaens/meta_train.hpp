#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metaens/meta_model.hpp"
#include "metaens/score_cache.hpp"

namespace metaens {

// One (state, oracle gain) supervision pair from a rollout step.
struct GainSample {
    StateVector phi{};
    double gain = 0.0;
    std::string dataset_id;
    size_t step = 0;  // >= 2: gains measure expansion of a non-empty ensemble
    std::string family;  // family key under the pool's family mode
};

struct RolloutConfig {
    size_t eta = 5;        // ensemble budget
    size_t T = 0;          // rollout length; 0 means T = eta
    double epsilon = 0.0;  // probability of a uniform-random expansion
    uint64_t seed = 0;

    size_t length() const { return T == 0 ? eta : T; }
};

struct RolloutResult {
    std::vector<std::string> trajectory;  // selected ids in order
    std::vector<GainSample> samples;
};

// AP(mean-extend(o_P, o_cand)) - AP(o_P) with
// mean-extend = (|P| * o_P + o_cand) / (|P| + 1).
double oracle_gain(const std::vector<double>& ensemble_score,
                   const std::vector<double>& candidate_score, size_t ensemble_size,
                   const std::vector<uint8_t>& labels);

// Greedy oracle rollout: primary = AP-argmax over the pool; each later step
// records one GainSample per remaining candidate, then extends by the
// true-gain argmax (with probability epsilon, a uniform-random candidate).
// Stops when the best true gain is <= 0 (that step's samples are kept) or the
// budget is reached. All argmax ties break toward the ascending model id.
// k_top = 0 applies the default rule for this N.
RolloutResult rollout(const ScoreMatrix& sm, const std::vector<uint8_t>& labels,
                      const ModelPool& pool, const RolloutConfig& cfg, size_t k_top = 0);

struct FamilyRiskTable {
    std::map<std::string, double> pi;       // >= 0; families w/o samples -> 0
    std::map<std::string, size_t> counts;
    double risk_percentile = 0.10;

    double lookup(const std::string& family_key) const;  // unseen -> 0
};

struct MetaDataset {
    ScoreMatrix sm;
    std::vector<uint8_t> labels;
};

struct HarvestResult {
    std::vector<StateVector> cls_x;
    std::vector<uint8_t> cls_y;  // I(gain > 0)
    std::vector<StateVector> reg_x;
    std::vector<double> reg_y;   // gain, positives only
    FamilyRiskTable risk;
    std::vector<GainSample> samples;  // everything, for gains.csv
};

// Rollouts across datasets (parallel, seeds derived per dataset id), merged
// in ascending dataset order so scheduling cannot change the result. The risk
// table covers every family key present in the pool; keys without samples get
// pi = 0, count 0. pi_F = max(0, -Q_{percentile}(family gains)).
HarvestResult harvest(const std::vector<MetaDataset>& meta, const ModelPool& pool,
                      const RolloutConfig& cfg, size_t k_top = 0,
                      double risk_percentile = 0.10);

void dump_gains_csv(const std::vector<GainSample>& samples, const std::string& path);

// Mean AP per model id across the meta corpus (the GLOBAL_BEST primary table).
std::map<std::string, double> mean_ap_per_model(const std::vector<MetaDataset>& meta);

struct MetaTrainConfig {
    RolloutConfig rollout;
    size_t n_trees_cls = 500;
    size_t n_trees_reg = 800;
    uint64_t model_seed = 42;
    size_t k_top = 0;
    double risk_percentile = 0.10;
};

// Full offline phase: harvest, fit both forests, attach risk + primary table
// and the selection config snapshot. harvest_out, when given, receives the
// raw harvest (sample counts, gains for gains.csv) so callers need not roll
// out twice.
TwoPartGainModel meta_train(const std::vector<MetaDataset>& meta, const ModelPool& pool,
                            const MetaTrainConfig& cfg, const ModelConfig& snapshot,
                            HarvestResult* harvest_out = nullptr);

struct TuneGrids {
    std::vector<std::pair<double, double>> tau_pairs;
    std::vector<double> betas;
    std::vector<double> lambdas;
};

// 6 tau pairs x 7 betas x 7 lambdas = 294 points.
TuneGrids default_tune_grids();

struct TuneResult {
    double tau1 = 0.0, tau2 = 0.0, beta = 0.0, lambda_fam = 0.0;
    double mean_ap = 0.0;
};

// Leave-one-dataset-out: per held-out dataset, fit on the rest and run
// selection under each grid point; pick the point with the best mean AP.
// Ties prefer the point closest (Euclidean on the raw tuple) to the defaults
// (0.001, 0.005, 3, 0.2), then lexicographic order.
TuneResult lodo_tune(const std::vector<MetaDataset>& meta, const ModelPool& pool,
                     const TuneGrids& grids, const MetaTrainConfig& cfg,
                     const ModelConfig& snapshot);

}  // namespace metaens
