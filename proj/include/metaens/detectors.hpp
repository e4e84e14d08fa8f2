#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metaens/dataset.hpp"

namespace metaens {

// OCSVM is a reserved slot: it participates in the taxonomy and risk tables
// so externally computed score columns can be tagged with it, but there is no
// built-in scorer (fit_score on it is an error).
enum class Family { KNN, LOF, HBOS, IFOREST, LODA, ABOD, COF, OCSVM };

enum class FamilyMode { FINE, COARSE };

// Coarse super-families used when per-family risk statistics would be too
// thin: {LOF, KNN, COF} -> density_proximity, {IFOREST} -> isolation_tree,
// {HBOS, OCSVM, LODA, ABOD} -> linear_probabilistic.
std::string family_name(Family f);
Family family_from_name(const std::string& name);
std::string coarse_group_name(Family f);

// Key under which a model's gains are pooled in the family risk table.
std::string family_key(Family f, FamilyMode mode);

// A single pool member. Params are kept in canonical per-family order with
// canonical value text, so the id is uniquely determined by (family, params).
struct DetectorSpec {
    Family family;
    std::vector<std::pair<std::string, std::string>> params;
    uint64_t seed = 0;  // used by randomized families (iforest, loda)
    std::string id;     // "<family>_<p1>=<v1>_<p2>=<v2>..."

    int param_int(const std::string& name) const;
    double param_double(const std::string& name) const;
    std::string param_str(const std::string& name) const;
};

// Builds the canonical id and validates/orders params; throws DataError on
// unknown params, missing required params, or out-of-range values.
DetectorSpec make_spec(Family family, std::vector<std::pair<std::string, std::string>> params,
                       uint64_t base_seed);

struct ModelPool {
    std::vector<DetectorSpec> specs;  // sorted by id, duplicates removed
    FamilyMode mode = FamilyMode::FINE;

    std::vector<std::string> ids() const;
    const DetectorSpec& by_id(const std::string& id) const;  // throws if absent
    uint64_t pool_hash() const;  // FNV-1a over the sorted id list
};

// Raw (unnormalized) anomaly scores, larger = more anomalous. X must be the
// preprocessed feature matrix. Throws DataError on data the family cannot
// score (e.g. k >= N for neighbor methods) with the family named.
std::vector<double> fit_score(const DetectorSpec& spec, const Matrix& X);

// Family of a score column: the pool spec's family when the id is a pool
// member, otherwise parsed from the id's "<family>_" prefix (how injected
// external columns, e.g. an OCSVM scored elsewhere, declare themselves).
Family family_of_id(const ModelPool& pool, const std::string& id);

// Exact k-nearest-neighbor lists, self excluded, each list ascending by
// (distance, index). If extend_kdist_ties, lists grow past k while the
// distance equals the k-th distance (the LOF neighborhood rule). Parallel
// over query points; output is independent of thread count.
std::vector<std::vector<std::pair<double, size_t>>> neighbor_lists(
    const Matrix& X, size_t k, bool manhattan = false, bool extend_kdist_ties = false);

}  // namespace metaens
