#include "metaens/score_cache.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "metaens/csv.hpp"
#include "metaens/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace metaens {

size_t ScoreMatrix::col_index(const std::string& id) const {
    for (size_t c = 0; c < model_ids.size(); ++c)
        if (model_ids[c] == id) return c;
    throw DataError("score matrix for " + dataset_id + " has no column '" + id + "'");
}

std::vector<double> ScoreMatrix::column(const std::string& id) const {
    return scores.col(col_index(id));
}

void ScoreMatrix::append_external(const std::string& id, const std::vector<double>& raw) {
    for (const auto& existing : model_ids)
        if (existing == id) throw DataError("external column id already present: " + id);
    if (raw.size() != scores.rows)
        throw DataError("external column length mismatch for " + id);
    auto norm = normalize_scores(raw);
    Matrix next(scores.rows, scores.cols + 1);
    for (size_t r = 0; r < scores.rows; ++r) {
        for (size_t c = 0; c < scores.cols; ++c) next.at(r, c) = scores.at(r, c);
        next.at(r, scores.cols) = norm[r];
    }
    scores = std::move(next);
    model_ids.push_back(id);
}

ScoreMatrix compute_scores(const Dataset& preprocessed, const ModelPool& pool) {
    size_t n = preprocessed.n(), k = pool.specs.size();
    ScoreMatrix sm;
    sm.dataset_id = preprocessed.id;
    sm.model_ids = pool.ids();
    sm.scores = Matrix(n, k);

    std::vector<std::string> errors(k);
#pragma omp parallel for schedule(dynamic)
    for (long long cc = 0; cc < static_cast<long long>(k); ++cc) {
        size_t c = static_cast<size_t>(cc);
        try {
            auto norm = normalize_scores(fit_score(pool.specs[c], preprocessed.features));
            for (size_t r = 0; r < n; ++r) sm.scores.at(r, c) = norm[r];
        } catch (const std::exception& e) {
            errors[c] = e.what();
        }
    }
    for (size_t c = 0; c < k; ++c)
        if (!errors[c].empty())
            throw DataError(preprocessed.id + ": " + errors[c]);
    return sm;
}

namespace {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Advisory lock via exclusive create (O_CREAT|O_EXCL). Waits up to ~10s for
// a concurrent writer, then gives up rather than risking a torn cache.
struct CacheLock {
    fs::path path;
    int fd = -1;

    explicit CacheLock(const fs::path& p) : path(p) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd >= 0) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        throw DataError("score cache locked too long (remove stale lock?): " + path.string());
    }

    ~CacheLock() {
        if (fd >= 0) {
            ::close(fd);
            std::error_code ec;
            fs::remove(path, ec);
        }
    }
};

}  // namespace

void save_score_cache(const ScoreMatrix& sm, const std::string& dir, uint64_t fingerprint,
                      uint64_t pool_hash) {
    fs::create_directories(dir);
    CacheLock lock(fs::path(dir) / (sm.dataset_id + ".lock"));

    fs::path csv_path = fs::path(dir) / (sm.dataset_id + ".scores.csv");
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write score cache: " + csv_path.string());
    for (size_t c = 0; c < sm.model_ids.size(); ++c) {
        if (c) out << ',';
        out << sm.model_ids[c];
    }
    out << '\n';
    for (size_t r = 0; r < sm.scores.rows; ++r) {
        for (size_t c = 0; c < sm.scores.cols; ++c) {
            if (c) out << ',';
            out << format_double(sm.scores.at(r, c));
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + csv_path.string());

    json manifest;
    manifest["dataset_id"] = sm.dataset_id;
    manifest["fingerprint"] = hex64(fingerprint);
    manifest["pool_hash"] = hex64(pool_hash);
    manifest["model_ids"] = sm.model_ids;
    manifest["created"] = static_cast<long long>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    fs::path man_path = fs::path(dir) / (sm.dataset_id + ".manifest.json");
    std::ofstream mout(man_path);
    mout << manifest.dump(2) << '\n';
    if (!mout) throw DataError("write failed: " + man_path.string());
}

std::optional<ScoreMatrix> load_score_cache(const std::string& dir,
                                            const std::string& dataset_id,
                                            uint64_t fingerprint, uint64_t pool_hash) {
    fs::path man_path = fs::path(dir) / (dataset_id + ".manifest.json");
    fs::path csv_path = fs::path(dir) / (dataset_id + ".scores.csv");
    if (!fs::exists(man_path) && !fs::exists(csv_path)) return std::nullopt;
    if (!fs::exists(man_path) || !fs::exists(csv_path))
        throw DataError("score cache for " + dataset_id + " is incomplete under " + dir);

    std::ifstream min(man_path);
    json manifest;
    try {
        min >> manifest;
    } catch (const json::exception& e) {
        throw DataError(man_path.string() + ": bad manifest: " + e.what());
    }
    if (manifest.value("dataset_id", "") != dataset_id)
        throw DataError(man_path.string() + ": manifest names a different dataset");
    if (manifest.value("fingerprint", "") != hex64(fingerprint))
        throw DataError("stale score cache for " + dataset_id +
                        ": dataset fingerprint changed; delete " + man_path.string());
    if (manifest.value("pool_hash", "") != hex64(pool_hash))
        throw DataError("stale score cache for " + dataset_id +
                        ": pool changed; delete " + man_path.string());

    CsvTable t = read_csv(csv_path.string());
    ScoreMatrix sm;
    sm.dataset_id = dataset_id;
    sm.model_ids = t.header;
    auto expect = manifest.value("model_ids", std::vector<std::string>{});
    if (sm.model_ids != expect)
        throw DataError(csv_path.string() + ": header disagrees with manifest model_ids");
    sm.scores = Matrix(t.rows.size(), t.header.size());
    for (size_t r = 0; r < t.rows.size(); ++r)
        for (size_t c = 0; c < t.header.size(); ++c)
            sm.scores.at(r, c) = parse_cell(t.rows[r][c], r + 2, c + 1, csv_path.string());
    return sm;
}

ScoreMatrix cached_scores(const Dataset& preprocessed, const ModelPool& pool,
                          const std::string& cache_dir) {
    if (cache_dir.empty()) return compute_scores(preprocessed, pool);
    uint64_t fp = dataset_fingerprint(preprocessed.features);
    uint64_t ph = pool.pool_hash();
    if (auto cached = load_score_cache(cache_dir, preprocessed.id, fp, ph)) {
        if (cached->scores.rows != preprocessed.n())
            throw DataError("stale score cache for " + preprocessed.id + ": row count changed");
        return std::move(*cached);
    }
    ScoreMatrix sm = compute_scores(preprocessed, pool);
    save_score_cache(sm, cache_dir, fp, ph);
    return sm;
}

std::string resolve_cache_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    const char* env = std::getenv("METAENS_CACHE_DIR");
    return env ? env : "";
}

}  // namespace metaens
