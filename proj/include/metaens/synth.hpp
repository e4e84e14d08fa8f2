#pragma once

#include <cstdint>
#include <string>

#include "metaens/dataset.hpp"

namespace metaens {

// Gaussian-blob inliers plus two planted anomaly regimes:
//  - global: uniform over the inlier bounding box inflated by 50% per side,
//  - local: drawn from a cluster with its covariance inflated 3x, so they sit
//    near cluster edges rather than far away.
// Output rows are inliers first, then global, then local anomalies; labels
// mark anomalies with 1. Fully determined by the spec (seed included).
struct SynthSpec {
    size_t n_inliers = 200;
    size_t n_anomaly_global = 5;
    size_t n_anomaly_local = 5;
    size_t dim = 4;
    size_t n_clusters = 3;
    uint64_t seed = 0;
};

// Contamination (anomalies / total) must land in (0, 0.5); dim and
// n_clusters must be >= 1. Violations throw DataError.
Dataset generate_synthetic(const SynthSpec& spec, const std::string& id);

// gen-synth writes this file name; deterministic in the spec.
std::string synth_file_name(const SynthSpec& spec);

// Dataset -> CSV with feature columns f0..f<d-1> plus a trailing label
// column (only if labeled). Doubles at 17 significant digits.
void write_dataset_csv(const Dataset& d, const std::string& path,
                       const std::string& label_column = "label");

}  // namespace metaens
