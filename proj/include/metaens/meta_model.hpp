#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metaens/detectors.hpp"
#include "metaens/state_features.hpp"

namespace metaens {

using StateVector = std::array<double, kStateDim>;

enum class Combiner { MEAN, MEDIAN, MAX, MIN };
std::string combiner_name(Combiner c);
Combiner combiner_from_name(const std::string& name);

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf payload
};

enum class ForestKind { MEAN_PROB, MEDIAN_LEAF };

// Extremely randomized trees: no bootstrap, K = ceil(sqrt(61)) uniformly
// drawn candidate features per node, one uniform threshold per candidate,
// unbounded depth, min leaf 1. Per-tree seeds come from the master seed via
// splitmix, so parallel training is bit-reproducible.
struct Forest {
    ForestKind kind = ForestKind::MEAN_PROB;
    size_t n_trees = 0;
    uint64_t seed = 0;
    std::vector<std::vector<TreeNode>> trees;

    double predict(const StateVector& x) const;  // mean over trees
};

// Balanced class weights w_c = n_total/(2 n_c); split criterion weighted Gini
// reduction; leaf = weighted positive fraction. Samples are canonicalized
// (sorted lexicographically by features then label) before fitting, so
// shuffled inputs produce identical forests. Throws DataError on single-class
// input.
Forest fit_classifier(const std::vector<StateVector>& x, const std::vector<uint8_t>& y,
                      size_t n_trees, uint64_t seed);

// Split criterion variance (SSE) reduction; leaf = median of targets, the
// MAE-optimal constant. Targets must be >= 0 and input non-empty.
Forest fit_regressor(const std::vector<StateVector>& x, const std::vector<double>& y,
                     size_t n_trees, uint64_t seed);

// Snapshot of the selection-time configuration carried inside the model file.
// k_top == 0 means "derive from N" (the default rule in state-features).
struct ModelConfig {
    double tau1 = 0.001;
    double tau2 = 0.005;
    double beta = 3.0;
    double lambda_fam = 0.2;
    size_t k_top = 0;
    size_t eta = 5;
    Combiner combiner = Combiner::MEAN;
    double risk_percentile = 0.10;
    FamilyMode family_mode = FamilyMode::FINE;
    int feature_layout_version = kFeatureLayoutVersion;
};

struct TwoPartGainModel {
    Forest cls;  // P(gain > 0)
    Forest reg;  // E[gain | gain > 0]
    std::map<std::string, double> family_risk;    // family key -> pi_F >= 0
    std::map<std::string, size_t> family_counts;  // gain samples per family
    std::map<std::string, double> primary_perf;   // model id -> mean AP on meta corpus
    ModelConfig config;

    // cls(phi) * reg(phi); never negative. Errors if the model was built
    // against a different feature layout than this binary implements.
    double predict_gain(const StateVector& phi) const;
    double predict_gain(const StateFeatures& phi) const;

    // pi_F of a family key; unseen families are neutral (0).
    double risk_of(const std::string& family_key) const;
};

// Single-JSON model file with format/layout versions and a CRC32 over the
// payload. Load rejects version mismatches and corrupt files explicitly.
void save_model(const TwoPartGainModel& model, const std::string& path);
TwoPartGainModel load_model(const std::string& path);

constexpr int kModelFormatVersion = 1;
extern const char* kToolVersion;

}  // namespace metaens
