#include "metaens/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "metaens/csv.hpp"
#include "metaens/errors.hpp"
#include "metaens/prng.hpp"

namespace metaens {

Dataset load_dataset(const std::string& path, const std::optional<std::string>& label_column) {
    CsvTable t = read_csv(path);
    size_t label_idx = t.header.size();
    if (label_column) {
        for (size_t c = 0; c < t.header.size(); ++c)
            if (t.header[c] == *label_column) label_idx = c;
        if (label_idx == t.header.size())
            throw DataError(path + ": label column '" + *label_column + "' not in header");
    }

    size_t d = t.header.size() - (label_column ? 1 : 0);
    if (d == 0) throw DataError(path + ": no feature columns");
    if (t.rows.size() < 2) throw DataError(path + ": need at least 2 rows");

    Dataset ds;
    ds.id = std::filesystem::path(path).stem().string();
    ds.features = Matrix(t.rows.size(), d);
    std::vector<uint8_t> labels;
    if (label_column) labels.reserve(t.rows.size());

    for (size_t r = 0; r < t.rows.size(); ++r) {
        size_t fc = 0;
        for (size_t c = 0; c < t.header.size(); ++c) {
            // CSV rows are 1-based and include the header line.
            double v = parse_cell(t.rows[r][c], r + 2, c + 1, path);
            if (c == label_idx) {
                if (v != 0.0 && v != 1.0) {
                    std::ostringstream os;
                    os << path << ": row " << r + 2 << ": label must be 0 or 1, got "
                       << t.rows[r][c];
                    throw DataError(os.str());
                }
                labels.push_back(static_cast<uint8_t>(v));
            } else {
                ds.features.at(r, fc++) = v;
            }
        }
    }
    if (label_column) ds.labels = std::move(labels);
    return ds;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw InternalError("quantile of empty vector");
    if (sorted.size() == 1) return sorted[0];
    double idx = q * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(idx);
    if (lo >= sorted.size() - 1) return sorted.back();
    double frac = idx - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Dataset preprocess(const Dataset& d, bool add_missing_indicators) {
    Dataset out = d;
    size_t n = d.n(), dim = d.dim();
    std::vector<size_t> had_missing;
    std::vector<double> colbuf;
    for (size_t c = 0; c < dim; ++c) {
        colbuf.clear();
        for (size_t r = 0; r < n; ++r) {
            double v = d.features.at(r, c);
            if (std::isfinite(v)) colbuf.push_back(v);
            else if (!std::isnan(v))
                throw DataError(d.id + ": column " + std::to_string(c + 1) + " contains inf");
        }
        if (colbuf.empty())
            throw DataError(d.id + ": column " + std::to_string(c + 1) + " is all missing");
        std::sort(colbuf.begin(), colbuf.end());
        double med = quantile_sorted(colbuf, 0.5);

        // Impute before computing the IQR so quartiles see the full column.
        bool imputed = colbuf.size() != n;
        if (imputed) {
            had_missing.push_back(c);
            colbuf.clear();
            for (size_t r = 0; r < n; ++r) {
                double v = d.features.at(r, c);
                colbuf.push_back(std::isnan(v) ? med : v);
            }
            std::sort(colbuf.begin(), colbuf.end());
            med = quantile_sorted(colbuf, 0.5);
        }
        double iqr = quantile_sorted(colbuf, 0.75) - quantile_sorted(colbuf, 0.25);

        for (size_t r = 0; r < n; ++r) {
            double v = d.features.at(r, c);
            if (std::isnan(v)) v = med;
            out.features.at(r, c) = iqr > 0.0 ? (v - med) / iqr : 0.0;
        }
    }
    if (add_missing_indicators && !had_missing.empty()) {
        Matrix wide(n, dim + had_missing.size());
        for (size_t r = 0; r < n; ++r) {
            for (size_t c = 0; c < dim; ++c) wide.at(r, c) = out.features.at(r, c);
            for (size_t j = 0; j < had_missing.size(); ++j)
                wide.at(r, dim + j) = std::isnan(d.features.at(r, had_missing[j])) ? 1.0 : 0.0;
        }
        out.features = std::move(wide);
    }
    return out;
}

std::vector<double> normalize_scores(const std::vector<double>& raw) {
    if (raw.empty()) throw DataError("normalize_scores: empty input");
    double lo = raw[0], hi = raw[0];
    for (double v : raw) {
        if (!std::isfinite(v)) throw DataError("normalize_scores: non-finite score");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(raw.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    double range = hi - lo;
    for (size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / range;
    return out;
}

uint64_t dataset_fingerprint(const Matrix& features) {
    return fnv1a64(features.data.data(), features.data.size() * sizeof(double));
}

}  // namespace metaens
