#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace metaens {

// Dense row-major matrix. Row-major layout is load-bearing: the dataset
// fingerprint hashes the raw byte image in this order.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }

    std::vector<double> col(size_t c) const {
        std::vector<double> out(rows);
        for (size_t r = 0; r < rows; ++r) out[r] = data[r * cols + c];
        return out;
    }
};

struct Dataset {
    std::string id;
    Matrix features;                               // N x d
    std::optional<std::vector<uint8_t>> labels;    // 0 = inlier, 1 = outlier

    size_t n() const { return features.rows; }
    size_t dim() const { return features.cols; }
    bool labeled() const { return labels.has_value(); }
};

// Reads a numeric CSV with a header row. If label_column names a header cell,
// that column is parsed as {0,1} labels and removed from the features.
// Missing feature cells become NaN (imputed later by preprocess); missing or
// non-binary label cells are an error. Dataset id = file stem.
Dataset load_dataset(const std::string& path,
                     const std::optional<std::string>& label_column = std::nullopt);

// Per-column median imputation of NaNs, then robust scaling:
// (x - median) / IQR, quartiles by linear interpolation between closest
// ranks. Zero-IQR columns become all-zero. All-NaN column is an error.
// With add_missing_indicators, every column that had at least one NaN gets a
// trailing 0/1 indicator column (order of the affected columns preserved).
// Returns a new dataset; input is untouched.
Dataset preprocess(const Dataset& d, bool add_missing_indicators = false);

// Quantile by linear interpolation between closest ranks on *sorted* values:
// fractional index q * (n - 1). Shared by the robust scaler and the family
// risk table so both use the identical convention.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Min-max normalization of one score vector to [0, 1]. A constant vector
// maps to all 0.5. Non-finite inputs are an error.
std::vector<double> normalize_scores(const std::vector<double>& raw);

// FNV-1a 64 over the row-major byte image of the feature matrix. Used to
// detect stale score caches after any change to the preprocessed features.
uint64_t dataset_fingerprint(const Matrix& features);

}  // namespace metaens
