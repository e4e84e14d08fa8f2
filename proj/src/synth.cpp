#include "metaens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metaens/csv.hpp"
#include "metaens/errors.hpp"
#include "metaens/prng.hpp"

namespace metaens {

Dataset generate_synthetic(const SynthSpec& spec, const std::string& id) {
    size_t n_anom = spec.n_anomaly_global + spec.n_anomaly_local;
    size_t n_total = spec.n_inliers + n_anom;
    if (spec.dim < 1) throw DataError("generate_synthetic: dim must be >= 1");
    if (spec.n_clusters < 1) throw DataError("generate_synthetic: n_clusters must be >= 1");
    if (n_total < 2) throw DataError("generate_synthetic: need at least 2 rows");
    double contamination = static_cast<double>(n_anom) / static_cast<double>(n_total);
    if (!(contamination > 0.0 && contamination < 0.5)) {
        std::ostringstream os;
        os << "generate_synthetic: contamination " << contamination
           << " outside (0, 0.5)";
        throw DataError(os.str());
    }

    Rng rng(spec.seed);
    size_t d = spec.dim, k = spec.n_clusters;

    std::vector<double> centers(k * d);
    std::vector<double> scales(k);
    for (size_t c = 0; c < k; ++c) {
        for (size_t j = 0; j < d; ++j) centers[c * d + j] = rng.uniform(-10.0, 10.0);
        scales[c] = rng.uniform(0.5, 2.0);
    }

    Dataset ds;
    ds.id = id;
    ds.features = Matrix(n_total, d);
    std::vector<uint8_t> labels(n_total, 0);

    // Inliers round-robin over clusters.
    for (size_t i = 0; i < spec.n_inliers; ++i) {
        size_t c = i % k;
        for (size_t j = 0; j < d; ++j)
            ds.features.at(i, j) = centers[c * d + j] + scales[c] * rng.normal();
    }

    // Bounding box of the inliers, inflated by half its extent per side.
    std::vector<double> lo(d), hi(d);
    for (size_t j = 0; j < d; ++j) {
        lo[j] = hi[j] = ds.features.at(0, j);
        for (size_t i = 1; i < spec.n_inliers; ++i) {
            lo[j] = std::min(lo[j], ds.features.at(i, j));
            hi[j] = std::max(hi[j], ds.features.at(i, j));
        }
        double margin = 0.5 * (hi[j] - lo[j]);
        if (margin == 0.0) margin = 1.0;
        lo[j] -= margin;
        hi[j] += margin;
    }

    size_t row = spec.n_inliers;
    for (size_t i = 0; i < spec.n_anomaly_global; ++i, ++row) {
        for (size_t j = 0; j < d; ++j) ds.features.at(row, j) = rng.uniform(lo[j], hi[j]);
        labels[row] = 1;
    }
    for (size_t i = 0; i < spec.n_anomaly_local; ++i, ++row) {
        size_t c = static_cast<size_t>(rng.below(k));
        for (size_t j = 0; j < d; ++j)
            ds.features.at(row, j) = centers[c * d + j] + 3.0 * scales[c] * rng.normal();
        labels[row] = 1;
    }

    ds.labels = std::move(labels);
    return ds;
}

std::string synth_file_name(const SynthSpec& spec) {
    std::ostringstream os;
    os << "synth_n" << spec.n_inliers << "_g" << spec.n_anomaly_global << "_l"
       << spec.n_anomaly_local << "_d" << spec.dim << "_c" << spec.n_clusters << "_seed"
       << spec.seed << ".csv";
    return os.str();
}

void write_dataset_csv(const Dataset& d, const std::string& path,
                       const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset CSV: " + path);
    for (size_t j = 0; j < d.dim(); ++j) {
        if (j) out << ',';
        out << 'f' << j;
    }
    if (d.labeled()) out << ',' << label_column;
    out << '\n';
    for (size_t i = 0; i < d.n(); ++i) {
        for (size_t j = 0; j < d.dim(); ++j) {
            if (j) out << ',';
            out << format_double(d.features.at(i, j));
        }
        if (d.labeled()) out << ',' << int((*d.labels)[i]);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace metaens
