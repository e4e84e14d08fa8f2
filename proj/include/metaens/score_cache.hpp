#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaens/dataset.hpp"
#include "metaens/detectors.hpp"

namespace metaens {

// Per-dataset normalized score columns, one per pool member, values in
// [0, 1]. Column order follows model_ids.
struct ScoreMatrix {
    std::string dataset_id;
    std::vector<std::string> model_ids;
    Matrix scores;  // N x |model_ids|

    size_t col_index(const std::string& id) const;  // throws DataError if absent
    std::vector<double> column(const std::string& id) const;

    // Tags external columns (e.g. an OCSVM scored elsewhere) onto the matrix.
    // The column is min-max normalized here; the id must be new.
    void append_external(const std::string& id, const std::vector<double>& raw);
};

// Fits every pool member on the preprocessed features and normalizes each
// column. Members run in parallel; output is independent of thread count.
ScoreMatrix compute_scores(const Dataset& preprocessed, const ModelPool& pool);

// Cache files under dir: <id>.scores.csv (header = model ids, %.17g) and
// <id>.manifest.json (dataset fingerprint, pool hash, timestamp). A
// <id>.lock file taken exclusively guards concurrent writers.
void save_score_cache(const ScoreMatrix& sm, const std::string& dir, uint64_t fingerprint,
                      uint64_t pool_hash);

// nullopt when no cache entry exists. A present entry whose fingerprint or
// pool hash differs is stale and throws DataError rather than being silently
// recomputed.
std::optional<ScoreMatrix> load_score_cache(const std::string& dir,
                                            const std::string& dataset_id,
                                            uint64_t fingerprint, uint64_t pool_hash);

// Load-or-compute. cache_dir may be empty (always compute, never persist).
ScoreMatrix cached_scores(const Dataset& preprocessed, const ModelPool& pool,
                          const std::string& cache_dir);

// Cache root resolution: explicit flag beats METAENS_CACHE_DIR beats "" (no
// caching).
std::string resolve_cache_dir(const std::string& flag_value);

}  // namespace metaens
