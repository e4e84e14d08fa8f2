#include "metaens/state_features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaens/errors.hpp"

namespace metaens {

size_t default_k_top(size_t n) {
    size_t k = static_cast<size_t>(std::ceil(0.05 * static_cast<double>(n)));
    return std::min(n, std::max<size_t>(10, k));
}

namespace {

constexpr size_t kHistBins = 10;
constexpr double kKlEps = 1e-12;

std::vector<size_t> top_k_indices(const std::vector<double>& v, size_t k) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] > v[b]; });
    idx.resize(k);
    return idx;
}

// Average fractional ranks, ties averaged (for Spearman).
std::vector<double> fractional_ranks(const std::vector<double>& v) {
    size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && v[idx[j]] == v[idx[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (size_t t = i; t < j; ++t) rank[idx[t]] = avg;
        i = j;
    }
    return rank;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Merge-sort inversion count over v (pairs i<j with v[i] > v[j]).
uint64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp, size_t lo,
                          size_t hi) {
    if (hi - lo < 2) return 0;
    size_t mid = lo + (hi - lo) / 2;
    uint64_t inv = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
    size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;  // v[i..mid) all exceed v[j]
            tmp[k++] = v[j++];
        } else {
            tmp[k++] = v[i++];
        }
    }
    while (i < mid) tmp[k++] = v[i++];
    while (j < hi) tmp[k++] = v[j++];
    std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
    return inv;
}

// Kendall tau-b in O(N log N): sort by (a, b), count inversions of the b
// sequence (= discordant pairs among those untied in a), and correct the
// denominator for ties. All-tied input on either side returns 0.
double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t x, size_t y) {
        if (a[x] != a[y]) return a[x] < a[y];
        return b[x] < b[y];
    });

    uint64_t n0 = static_cast<uint64_t>(n) * (n - 1) / 2;
    auto pairs_in_groups = [](uint64_t t) { return t * (t - 1) / 2; };

    uint64_t ties_a = 0, ties_ab = 0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j < n && a[idx[j]] == a[idx[i]]) ++j;
            ties_a += pairs_in_groups(j - i);
            size_t p = i;
            while (p < j) {
                size_t q = p;
                while (q < j && b[idx[q]] == b[idx[p]]) ++q;
                ties_ab += pairs_in_groups(q - p);
                p = q;
            }
            i = j;
        }
    }
    uint64_t ties_b = 0;
    {
        std::vector<double> bs(n);
        for (size_t i = 0; i < n; ++i) bs[i] = b[i];
        std::sort(bs.begin(), bs.end());
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j < n && bs[j] == bs[i]) ++j;
            ties_b += pairs_in_groups(j - i);
            i = j;
        }
    }

    std::vector<double> bseq(n), tmp(n);
    for (size_t i = 0; i < n; ++i) bseq[i] = b[idx[i]];
    uint64_t discordant = count_inversions(bseq, tmp, 0, n);

    uint64_t mixed = n0 - ties_a - ties_b + ties_ab;  // pairs untied in both
    double denom = std::sqrt(static_cast<double>(n0 - ties_a)) *
                   std::sqrt(static_cast<double>(n0 - ties_b));
    if (denom == 0.0) return 0.0;
    double concordant = static_cast<double>(mixed) - static_cast<double>(discordant);
    return (concordant - static_cast<double>(discordant)) / denom;
}

struct Moments {
    double mean = 0.0, sd = 0.0, skew = 0.0, ex_kurt = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    double n = static_cast<double>(v.size());
    for (double x : v) m.mean += x;
    m.mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.sd = std::sqrt(m2);
    if (m2 > 0.0) {
        m.skew = m3 / (m2 * m.sd);
        m.ex_kurt = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

std::array<double, kHistBins> histogram(const std::vector<double>& v, double lo, double hi) {
    std::array<double, kHistBins> p{};
    double width = (hi - lo) / static_cast<double>(kHistBins);
    for (double x : v) {
        size_t b = 0;
        if (width > 0.0) {
            double f = (x - lo) / width;
            long long i = static_cast<long long>(f);
            if (i < 0) i = 0;
            if (i >= static_cast<long long>(kHistBins)) i = kHistBins - 1;
            b = static_cast<size_t>(i);
        }
        p[b] += 1.0;
    }
    for (double& x : p) x /= static_cast<double>(v.size());
    return p;
}

double entropy_own_range(const std::vector<double>& v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    auto p = histogram(v, lo, hi);
    double h = 0.0;
    for (double pi : p)
        if (pi > 0.0) h -= pi * std::log(pi);
    return h;
}

}  // namespace

double jaccard_top_k(const std::vector<double>& a, const std::vector<double>& b, size_t k) {
    if (a.size() != b.size()) throw DataError("jaccard_top_k: length mismatch");
    if (a.empty() || k == 0) throw DataError("jaccard_top_k: empty input or k = 0");
    k = std::min(k, a.size());
    auto ta = top_k_indices(a, k);
    auto tb = top_k_indices(b, k);
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    std::vector<size_t> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                          std::back_inserter(common));
    double inter = static_cast<double>(common.size());
    double uni = static_cast<double>(2 * k) - inter;
    return inter / uni;
}

std::array<double, kPairFeatureDim> pair_features(const std::vector<double>& a,
                                                  const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("pair_features: length mismatch");
    size_t n = a.size();
    if (n < 2) throw DataError("pair_features: need at least 2 points");
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
            throw DataError("pair_features: non-finite input");

    std::array<double, kPairFeatureDim> f{};
    f[0] = pearson(a, b);
    f[1] = pearson(fractional_ranks(a), fractional_ranks(b));
    f[2] = kendall_tau_b(a, b);

    double dot = 0.0, na = 0.0, nb = 0.0;
    double sum_abs = 0.0, sum_sq = 0.0, max_abs = 0.0;
    for (size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
        double d = std::fabs(a[i] - b[i]);
        sum_abs += d;
        sum_sq += d * d;
        max_abs = std::max(max_abs, d);
    }
    f[3] = (na > 0.0 && nb > 0.0) ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
    f[4] = sum_abs / static_cast<double>(n);
    f[5] = std::sqrt(sum_sq / static_cast<double>(n));
    f[6] = max_abs;

    auto k_at = [n](double frac) {
        size_t k = static_cast<size_t>(std::ceil(frac * static_cast<double>(n)));
        return std::min(n, std::max<size_t>(5, k));
    };
    f[7] = jaccard_top_k(a, b, k_at(0.01));
    f[8] = jaccard_top_k(a, b, k_at(0.05));
    f[9] = jaccard_top_k(a, b, k_at(0.10));

    // Joint-range histograms so both vectors share bin edges.
    double lo = std::min(*std::min_element(a.begin(), a.end()),
                         *std::min_element(b.begin(), b.end()));
    double hi = std::max(*std::max_element(a.begin(), a.end()),
                         *std::max_element(b.begin(), b.end()));
    auto pa = histogram(a, lo, hi);
    auto pb = histogram(b, lo, hi);
    double kl = 0.0, inter = 0.0;
    for (size_t i = 0; i < kHistBins; ++i) {
        kl += pa[i] * std::log((pa[i] + kKlEps) / (pb[i] + kKlEps));
        kl += pb[i] * std::log((pb[i] + kKlEps) / (pa[i] + kKlEps));
        inter += std::min(pa[i], pb[i]);
    }
    f[10] = kl;
    f[11] = inter;

    Moments mom_a = moments(a), mom_b = moments(b);
    double ent_a = entropy_own_range(a), ent_b = entropy_own_range(b);
    f[12] = mom_a.mean - mom_b.mean;
    f[13] = mom_a.sd - mom_b.sd;
    f[14] = ent_a - ent_b;
    f[15] = mom_b.mean;
    f[16] = mom_b.sd;
    f[17] = mom_b.skew;
    f[18] = mom_b.ex_kurt;
    f[19] = ent_b;
    return f;
}

std::array<double, kStateDim> StateFeatures::to_vector() const {
    std::array<double, kStateDim> v{};
    size_t p = 0;
    for (double x : last_cand) v[p++] = x;
    for (double x : last_ens) v[p++] = x;
    for (double x : cand_ens) v[p++] = x;
    v[p] = ensemble_size;
    return v;
}

StateFeatures build_state(const ScoreMatrix& sm, const std::string& candidate_id,
                          const std::string& last_id,
                          const std::vector<std::string>& ensemble_ids, size_t k_top) {
    if (ensemble_ids.empty()) throw DataError("build_state: empty ensemble");
    std::vector<std::string> members = ensemble_ids;
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end())
        throw DataError("build_state: duplicate ensemble member");
    if (!std::binary_search(members.begin(), members.end(), last_id))
        throw DataError("build_state: last model not in ensemble");
    if (std::binary_search(members.begin(), members.end(), candidate_id))
        throw DataError("build_state: candidate already in ensemble");
    (void)k_top;  // similarity features derive k from N; k_top is the
                  // selector-side knob and kept in the signature for symmetry

    auto cand = sm.column(candidate_id);
    auto last = sm.column(last_id);

    StateFeatures st;
    st.last_cand = pair_features(last, cand);
    st.ensemble_size = static_cast<double>(members.size());

    // Ascending-id accumulation keeps pooled blocks bitwise permutation
    // invariant.
    size_t others = 0;
    for (const auto& id : members) {
        auto col = sm.column(id);
        auto to_cand = pair_features(col, cand);
        for (size_t i = 0; i < kPairFeatureDim; ++i) st.cand_ens[i] += to_cand[i];
        if (id != last_id) {
            auto from_last = pair_features(last, col);
            for (size_t i = 0; i < kPairFeatureDim; ++i) st.last_ens[i] += from_last[i];
            ++others;
        }
    }
    for (size_t i = 0; i < kPairFeatureDim; ++i)
        st.cand_ens[i] /= static_cast<double>(members.size());
    if (others > 0)
        for (size_t i = 0; i < kPairFeatureDim; ++i)
            st.last_ens[i] /= static_cast<double>(others);
    return st;
}

}  // namespace metaens
