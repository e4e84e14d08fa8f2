#include "metaens/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>

#include "metaens/errors.hpp"
#include "metaens/prng.hpp"

namespace metaens {

namespace {

constexpr double kLogEps = 1e-12;  // floor inside log-density scores

const char* kFamilyNames[] = {"knn", "lof", "hbos", "iforest", "loda", "abod", "cof", "ocsvm"};

// Canonical parameter order per family; ids depend on it.
const std::map<Family, std::vector<std::string>>& param_order() {
    static const std::map<Family, std::vector<std::string>> order = {
        {Family::KNN, {"k", "method"}},
        {Family::LOF, {"k", "metric"}},
        {Family::HBOS, {"bins", "tol"}},
        {Family::IFOREST, {"trees", "max_features", "psi"}},
        {Family::LODA, {"projections", "bins"}},
        {Family::ABOD, {"k"}},
        {Family::COF, {"k"}},
        {Family::OCSVM, {}},
    };
    return order;
}

std::string canonical_value(const std::string& raw) {
    // Integers stay plain, other numerics go through %g, anything else is
    // taken verbatim. Keeps "0.30" and "0.3" from producing distinct ids.
    const char* begin = raw.c_str();
    char* end = nullptr;
    long long i = std::strtoll(begin, &end, 10);
    if (end != begin && *end == '\0') return std::to_string(i);
    double v = std::strtod(begin, &end);
    if (end != begin && *end == '\0') {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return buf;
    }
    return raw;
}

[[noreturn]] void bad_param(const std::string& fam, const std::string& msg) {
    throw DataError("pool grid: " + fam + ": " + msg);
}

}  // namespace

std::string family_name(Family f) { return kFamilyNames[static_cast<int>(f)]; }

Family family_from_name(const std::string& name) {
    for (int i = 0; i < 8; ++i)
        if (name == kFamilyNames[i]) return static_cast<Family>(i);
    throw DataError("unknown detector family: " + name);
}

std::string coarse_group_name(Family f) {
    switch (f) {
        case Family::KNN:
        case Family::LOF:
        case Family::COF:
            return "density_proximity";
        case Family::IFOREST:
            return "isolation_tree";
        case Family::HBOS:
        case Family::OCSVM:
        case Family::LODA:
        case Family::ABOD:
            return "linear_probabilistic";
    }
    throw InternalError("coarse_group_name: bad family");
}

std::string family_key(Family f, FamilyMode mode) {
    return mode == FamilyMode::FINE ? family_name(f) : coarse_group_name(f);
}

int DetectorSpec::param_int(const std::string& name) const {
    for (const auto& [k, v] : params)
        if (k == name) return std::atoi(v.c_str());
    throw InternalError(id + ": missing param " + name);
}

double DetectorSpec::param_double(const std::string& name) const {
    for (const auto& [k, v] : params)
        if (k == name) return std::atof(v.c_str());
    throw InternalError(id + ": missing param " + name);
}

std::string DetectorSpec::param_str(const std::string& name) const {
    for (const auto& [k, v] : params)
        if (k == name) return v;
    throw InternalError(id + ": missing param " + name);
}

DetectorSpec make_spec(Family family, std::vector<std::pair<std::string, std::string>> params,
                       uint64_t base_seed) {
    const std::string fam = family_name(family);
    const auto& order = param_order().at(family);
    for (const auto& [k, v] : params) {
        if (std::find(order.begin(), order.end(), k) == order.end())
            bad_param(fam, "unknown param '" + k + "'");
    }

    DetectorSpec s;
    s.family = family;
    for (const auto& name : order) {
        bool found = false;
        for (const auto& [k, v] : params) {
            if (k == name) {
                s.params.emplace_back(name, canonical_value(v));
                found = true;
                break;
            }
        }
        if (!found) bad_param(fam, "missing param '" + name + "'");
    }

    // Range checks per family.
    auto need_pos_int = [&](const char* p) {
        if (s.param_int(p) < 1) bad_param(fam, std::string(p) + " must be >= 1");
    };
    switch (family) {
        case Family::KNN: {
            need_pos_int("k");
            auto m = s.param_str("method");
            if (m != "largest" && m != "mean" && m != "median")
                bad_param(fam, "method must be largest|mean|median");
            break;
        }
        case Family::LOF: {
            need_pos_int("k");
            auto m = s.param_str("metric");
            if (m != "euclidean" && m != "manhattan")
                bad_param(fam, "metric must be euclidean|manhattan");
            break;
        }
        case Family::HBOS:
            need_pos_int("bins");
            if (s.param_double("tol") < 0.0) bad_param(fam, "tol must be >= 0");
            break;
        case Family::IFOREST: {
            need_pos_int("trees");
            double mf = s.param_double("max_features");
            if (!(mf > 0.0 && mf <= 1.0)) bad_param(fam, "max_features must be in (0,1]");
            if (s.param_int("psi") < 2) bad_param(fam, "psi must be >= 2");
            break;
        }
        case Family::LODA:
            need_pos_int("projections");
            need_pos_int("bins");
            break;
        case Family::ABOD:
            if (s.param_int("k") < 2) bad_param(fam, "k must be >= 2");
            break;
        case Family::COF:
            need_pos_int("k");
            break;
        case Family::OCSVM:
            break;
    }

    std::ostringstream id;
    id << fam;
    for (const auto& [k, v] : s.params) id << '_' << k << '=' << v;
    s.id = id.str();
    s.seed = derive_seed(base_seed, fnv1a64_str(s.id));
    return s;
}

std::vector<std::string> ModelPool::ids() const {
    std::vector<std::string> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(s.id);
    return out;
}

const DetectorSpec& ModelPool::by_id(const std::string& id) const {
    for (const auto& s : specs)
        if (s.id == id) return s;
    throw DataError("model id not in pool: " + id);
}

uint64_t ModelPool::pool_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& s : specs) {
        h = fnv1a64_str(s.id, h);
        h = fnv1a64("\n", 1, h);
    }
    return h;
}

Family family_of_id(const ModelPool& pool, const std::string& id) {
    for (const auto& s : pool.specs)
        if (s.id == id) return s.family;
    auto cut = id.find('_');
    if (cut == std::string::npos)
        throw DataError("cannot infer family from column id: " + id);
    return family_from_name(id.substr(0, cut));
}

// ---------------------------------------------------------------------------
// Neighbor kernel

std::vector<std::vector<std::pair<double, size_t>>> neighbor_lists(
    const Matrix& X, size_t k, bool manhattan, bool extend_kdist_ties) {
    size_t n = X.rows, d = X.cols;
    if (k >= n)
        throw DataError("neighbor search: k=" + std::to_string(k) +
                        " must be < N=" + std::to_string(n));
    std::vector<std::vector<std::pair<double, size_t>>> out(n);

#pragma omp parallel for schedule(dynamic, 8)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        std::vector<std::pair<double, size_t>> row;
        row.reserve(n - 1);
        const double* xi = &X.data[i * d];
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* xj = &X.data[j * d];
            double dist = 0.0;
            if (manhattan) {
                for (size_t c = 0; c < d; ++c) dist += std::fabs(xi[c] - xj[c]);
            } else {
                for (size_t c = 0; c < d; ++c) {
                    double diff = xi[c] - xj[c];
                    dist += diff * diff;
                }
            }
            row.emplace_back(dist, j);
        }
        // (distance, index) order makes ties deterministic.
        std::sort(row.begin(), row.end());
        size_t keep = k;
        if (extend_kdist_ties)
            while (keep < row.size() && row[keep].first == row[k - 1].first) ++keep;
        row.resize(keep);
        if (!manhattan)
            for (auto& [dist, idx] : row) dist = std::sqrt(dist);
        out[i] = std::move(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Family scorers

namespace {

std::vector<double> score_knn(const DetectorSpec& s, const Matrix& X) {
    size_t k = static_cast<size_t>(s.param_int("k"));
    auto method = s.param_str("method");
    auto nb = neighbor_lists(X, k);
    std::vector<double> out(X.rows);
    for (size_t i = 0; i < X.rows; ++i) {
        const auto& row = nb[i];
        if (method == "largest") {
            out[i] = row[k - 1].first;
        } else if (method == "mean") {
            double sum = 0.0;
            for (size_t t = 0; t < k; ++t) sum += row[t].first;
            out[i] = sum / static_cast<double>(k);
        } else {  // median; list is already ascending
            out[i] = (k % 2) ? row[k / 2].first
                             : 0.5 * (row[k / 2 - 1].first + row[k / 2].first);
        }
    }
    return out;
}

std::vector<double> score_lof(const DetectorSpec& s, const Matrix& X) {
    size_t k = static_cast<size_t>(s.param_int("k"));
    bool manhattan = s.param_str("metric") == "manhattan";
    auto nb = neighbor_lists(X, k, manhattan, /*extend_kdist_ties=*/true);
    size_t n = X.rows;

    // k-distance = distance of the k-th neighbor; the neighborhood keeps all
    // points at exactly that distance.
    std::vector<double> kdist(n);
    for (size_t i = 0; i < n; ++i) kdist[i] = nb[i][k - 1].first;

    std::vector<double> lrd(n);
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& [dist, j] : nb[i]) sum += std::max(dist, kdist[j]);
        // Sum is zero only when >= k exact duplicates exist; cap instead of
        // dividing by zero so ratios of two capped densities stay ~1.
        lrd[i] = sum > 0.0 ? static_cast<double>(nb[i].size()) / sum : 1e300;
    }

    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& [dist, j] : nb[i]) sum += lrd[j];
        out[i] = sum / (static_cast<double>(nb[i].size()) * lrd[i]);
    }
    return out;
}

// Shared by HBOS and LODA: equal-width histogram negative log density.
// Constant columns collapse to one full bin and contribute ~0.
struct Hist {
    double lo = 0.0, width = 0.0;
    size_t bins = 0;
    std::vector<double> density;

    void fit(const std::vector<double>& v, size_t b) {
        bins = b;
        double hi = v[0];
        lo = v[0];
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        width = (hi - lo) / static_cast<double>(b);
        std::vector<size_t> count(b, 0);
        for (double x : v) ++count[index(x)];
        density.resize(b);
        for (size_t i = 0; i < b; ++i)
            density[i] = static_cast<double>(count[i]) / static_cast<double>(v.size());
    }

    size_t index(double x) const {
        if (width <= 0.0) return 0;
        double f = (x - lo) / width;
        long long i = static_cast<long long>(f);
        if (i < 0) i = 0;
        if (i >= static_cast<long long>(bins)) i = static_cast<long long>(bins) - 1;
        return static_cast<size_t>(i);
    }

    // tol widens the accepted range when scoring values outside [lo, hi];
    // beyond tol*width past an edge the density is 0. Scoring the fit data
    // never takes that path.
    double density_at(double x, double tol) const {
        if (width > 0.0) {
            double hi = lo + width * static_cast<double>(bins);
            if (x < lo - tol * width || x > hi + tol * width) return 0.0;
        }
        return density[index(x)];
    }
};

std::vector<double> score_hbos(const DetectorSpec& s, const Matrix& X) {
    size_t bins = static_cast<size_t>(s.param_int("bins"));
    double tol = s.param_double("tol");
    std::vector<double> out(X.rows, 0.0);
    std::vector<double> col(X.rows);
    Hist h;
    for (size_t c = 0; c < X.cols; ++c) {
        for (size_t r = 0; r < X.rows; ++r) col[r] = X.at(r, c);
        h.fit(col, bins);
        for (size_t r = 0; r < X.rows; ++r)
            out[r] += -std::log(h.density_at(col[r], tol) + kLogEps);
    }
    return out;
}

struct IsoNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    size_t size = 0;  // leaf only
};

// Average unsuccessful-search path length in a BST of m nodes.
double iso_c(size_t m) {
    if (m <= 1) return 0.0;
    if (m == 2) return 1.0;
    double md = static_cast<double>(m);
    double harmonic = std::log(md - 1.0) + 0.5772156649015329;
    return 2.0 * harmonic - 2.0 * (md - 1.0) / md;
}

void iso_build(std::vector<IsoNode>& nodes, int node, std::vector<size_t>& rows,
               size_t begin, size_t end, size_t depth, size_t max_depth,
               const std::vector<size_t>& feats, const Matrix& X, Rng& rng) {
    size_t m = end - begin;
    if (m <= 1 || depth >= max_depth) {
        nodes[node].size = m;
        return;
    }
    // Candidate features must vary inside this node.
    std::vector<size_t> usable;
    for (size_t f : feats) {
        double lo = X.at(rows[begin], f), hi = lo;
        for (size_t t = begin + 1; t < end; ++t) {
            double v = X.at(rows[t], f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi > lo) usable.push_back(f);
    }
    if (usable.empty()) {
        nodes[node].size = m;
        return;
    }
    size_t f = usable[rng.below(usable.size())];
    double lo = X.at(rows[begin], f), hi = lo;
    for (size_t t = begin + 1; t < end; ++t) {
        double v = X.at(rows[t], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double thr = rng.uniform(lo, hi);
    auto mid_it = std::partition(rows.begin() + begin, rows.begin() + end,
                                 [&](size_t r) { return X.at(r, f) < thr; });
    size_t mid = static_cast<size_t>(mid_it - rows.begin());
    if (mid == begin || mid == end) {  // uniform(lo,hi) landed on an edge
        nodes[node].size = m;
        return;
    }
    nodes[node].feature = static_cast<int>(f);
    nodes[node].threshold = thr;
    nodes[node].left = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[node].right = static_cast<int>(nodes.size());
    nodes.emplace_back();
    iso_build(nodes, nodes[node].left, rows, begin, mid, depth + 1, max_depth, feats, X, rng);
    iso_build(nodes, nodes[node].right, rows, mid, end, depth + 1, max_depth, feats, X, rng);
}

std::vector<double> score_iforest(const DetectorSpec& s, const Matrix& X) {
    size_t n_trees = static_cast<size_t>(s.param_int("trees"));
    double max_features = s.param_double("max_features");
    size_t psi = std::min<size_t>(static_cast<size_t>(s.param_int("psi")), X.rows);
    size_t n = X.rows, d = X.cols;
    size_t n_feats = std::max<size_t>(1, static_cast<size_t>(
                                             std::ceil(max_features * static_cast<double>(d))));
    size_t max_depth = static_cast<size_t>(std::ceil(std::log2(static_cast<double>(psi))));

    std::vector<std::vector<IsoNode>> trees(n_trees);
#pragma omp parallel for schedule(dynamic)
    for (long long tt = 0; tt < static_cast<long long>(n_trees); ++tt) {
        size_t t = static_cast<size_t>(tt);
        Rng rng(derive_seed(s.seed, t));  // per-tree stream: thread-order free
        std::vector<size_t> rows(n);
        std::iota(rows.begin(), rows.end(), size_t{0});
        for (size_t i = 0; i < psi; ++i) {  // partial Fisher-Yates sample
            size_t j = i + static_cast<size_t>(rng.below(n - i));
            std::swap(rows[i], rows[j]);
        }
        rows.resize(psi);
        std::sort(rows.begin(), rows.end());

        std::vector<size_t> feats(d);
        std::iota(feats.begin(), feats.end(), size_t{0});
        for (size_t i = 0; i < n_feats; ++i) {
            size_t j = i + static_cast<size_t>(rng.below(d - i));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(n_feats);
        std::sort(feats.begin(), feats.end());

        trees[t].emplace_back();
        iso_build(trees[t], 0, rows, 0, rows.size(), 0, max_depth, feats, X, rng);
    }

    double norm = iso_c(psi);
    std::vector<double> out(n);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        double path_sum = 0.0;
        for (const auto& tree : trees) {
            size_t node = 0, depth = 0;
            while (tree[node].feature >= 0) {
                node = X.at(i, static_cast<size_t>(tree[node].feature)) < tree[node].threshold
                           ? static_cast<size_t>(tree[node].left)
                           : static_cast<size_t>(tree[node].right);
                ++depth;
            }
            path_sum += static_cast<double>(depth) + iso_c(tree[node].size);
        }
        double mean_path = path_sum / static_cast<double>(n_trees);
        out[i] = std::pow(2.0, -mean_path / norm);
    }
    return out;
}

std::vector<double> score_loda(const DetectorSpec& s, const Matrix& X) {
    size_t n_proj = static_cast<size_t>(s.param_int("projections"));
    size_t bins = static_cast<size_t>(s.param_int("bins"));
    size_t n = X.rows, d = X.cols;
    size_t nnz = std::min<size_t>(
        d, static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));

    std::vector<double> out(n, 0.0);
    std::vector<std::vector<double>> partial(n_proj);
#pragma omp parallel for schedule(dynamic)
    for (long long pp = 0; pp < static_cast<long long>(n_proj); ++pp) {
        size_t p = static_cast<size_t>(pp);
        Rng rng(derive_seed(s.seed, p));
        std::vector<size_t> coords(d);
        std::iota(coords.begin(), coords.end(), size_t{0});
        for (size_t i = 0; i < nnz; ++i) {
            size_t j = i + static_cast<size_t>(rng.below(d - i));
            std::swap(coords[i], coords[j]);
        }
        coords.resize(nnz);
        std::sort(coords.begin(), coords.end());
        std::vector<double> w(nnz);
        for (double& wi : w) wi = rng.normal();

        std::vector<double> z(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t t = 0; t < nnz; ++t) z[i] += w[t] * X.at(i, coords[t]);
        Hist h;
        h.fit(z, bins);
        partial[p].resize(n);
        for (size_t i = 0; i < n; ++i)
            partial[p][i] = -std::log(h.density[h.index(z[i])] + kLogEps);
    }
    // Fixed summation order regardless of how the loop above was scheduled.
    for (size_t p = 0; p < n_proj; ++p)
        for (size_t i = 0; i < n; ++i) out[i] += partial[p][i];
    for (double& v : out) v /= static_cast<double>(n_proj);
    return out;
}

std::vector<double> score_abod(const DetectorSpec& s, const Matrix& X) {
    size_t k = static_cast<size_t>(s.param_int("k"));
    auto nb = neighbor_lists(X, k);
    size_t n = X.rows, d = X.cols;
    std::vector<double> out(n);

#pragma omp parallel for schedule(dynamic, 8)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        // Distance-weighted cosine between neighbor directions; the variance
        // of this quantity is low for outliers (all neighbors on one side).
        double sum = 0.0, sum2 = 0.0;
        size_t count = 0;
        for (size_t a = 0; a < k; ++a) {
            size_t ja = nb[i][a].second;
            for (size_t b = a + 1; b < k; ++b) {
                size_t jb = nb[i][b].second;
                double dot = 0.0, na = 0.0, nbn = 0.0;
                for (size_t c = 0; c < d; ++c) {
                    double va = X.at(ja, c) - X.at(i, c);
                    double vb = X.at(jb, c) - X.at(i, c);
                    dot += va * vb;
                    na += va * va;
                    nbn += vb * vb;
                }
                if (na == 0.0 || nbn == 0.0) continue;  // coincident neighbor
                double w = dot / (na * nbn);
                sum += w;
                sum2 += w * w;
                ++count;
            }
        }
        if (count < 2) {
            out[i] = 0.0;
            continue;
        }
        double mean = sum / static_cast<double>(count);
        double var = sum2 / static_cast<double>(count) - mean * mean;
        out[i] = -var;
    }
    return out;
}

std::vector<double> score_cof(const DetectorSpec& s, const Matrix& X) {
    size_t k = static_cast<size_t>(s.param_int("k"));
    auto nb = neighbor_lists(X, k);
    size_t n = X.rows, d = X.cols;

    auto dist = [&](size_t a, size_t b) {
        double acc = 0.0;
        for (size_t c = 0; c < d; ++c) {
            double diff = X.at(a, c) - X.at(b, c);
            acc += diff * diff;
        }
        return std::sqrt(acc);
    };

    // Average chaining distance over the set-based nearest path through the
    // k-neighborhood; early links get the larger weights.
    std::vector<double> ac(n);
#pragma omp parallel for schedule(dynamic, 8)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        size_t i = static_cast<size_t>(ii);
        std::vector<size_t> chain{i};
        std::vector<size_t> remaining;
        for (size_t t = 0; t < k; ++t) remaining.push_back(nb[i][t].second);
        double acc = 0.0;
        double denom = static_cast<double>(k) * static_cast<double>(k + 1);
        for (size_t step = 1; step <= k; ++step) {
            double best = 0.0;
            size_t best_r = 0;
            bool first = true;
            for (size_t r = 0; r < remaining.size(); ++r) {
                double dmin = dist(chain[0], remaining[r]);
                for (size_t g = 1; g < chain.size(); ++g)
                    dmin = std::min(dmin, dist(chain[g], remaining[r]));
                if (first || dmin < best) {  // ties: first remaining wins
                    best = dmin;
                    best_r = r;
                    first = false;
                }
            }
            acc += 2.0 * static_cast<double>(k + 1 - step) / denom * best;
            chain.push_back(remaining[best_r]);
            remaining.erase(remaining.begin() + static_cast<long>(best_r));
        }
        ac[i] = acc;
    }

    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        double neighbor_sum = 0.0;
        for (size_t t = 0; t < k; ++t) neighbor_sum += ac[nb[i][t].second];
        out[i] = neighbor_sum > 0.0
                     ? static_cast<double>(k) * ac[i] / neighbor_sum
                     : 1.0;  // all-coincident neighborhood: indistinguishable
    }
    return out;
}

std::vector<double> fit_score_impl(const DetectorSpec& spec, const Matrix& X) {
    switch (spec.family) {
        case Family::KNN:
            return score_knn(spec, X);
        case Family::LOF:
            return score_lof(spec, X);
        case Family::HBOS:
            return score_hbos(spec, X);
        case Family::IFOREST:
            return score_iforest(spec, X);
        case Family::LODA:
            return score_loda(spec, X);
        case Family::ABOD:
            return score_abod(spec, X);
        case Family::COF:
            return score_cof(spec, X);
        case Family::OCSVM:
            throw DataError(
                "ocsvm: no built-in scorer; provide externally computed score columns");
    }
    throw InternalError("fit_score: bad family");
}

}  // namespace

std::vector<double> fit_score(const DetectorSpec& spec, const Matrix& X) {
    if (X.rows < 2) throw DataError(spec.id + ": need at least 2 rows");
    try {
        return fit_score_impl(spec, X);
    } catch (const DataError& e) {
        std::string msg = e.what();
        if (msg.rfind(spec.id, 0) == 0) throw;
        throw DataError(spec.id + ": " + msg);
    }
}

}  // namespace metaens
