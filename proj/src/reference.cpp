#include "metaens/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "metaens/errors.hpp"

namespace metaens::ref {

namespace {

// Rank of item i under "descending score, ascending index": 1 + the number
// of items strictly ahead of it.
size_t rank_of(const std::vector<double>& s, size_t i) {
    size_t r = 1;
    for (size_t j = 0; j < s.size(); ++j) {
        if (s[j] > s[i]) ++r;
        else if (s[j] == s[i] && j < i) ++r;
    }
    return r;
}

size_t count_pos(const std::vector<uint8_t>& y) {
    size_t p = 0;
    for (uint8_t v : y) p += v;
    return p;
}

void check_binary(const std::vector<double>& s, const std::vector<uint8_t>& y) {
    if (s.size() != y.size()) throw DataError("reference metric: size mismatch");
    size_t p = count_pos(y);
    if (p == 0 || p == y.size()) throw DataError("reference metric: single-class labels");
}

}  // namespace

double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels) {
    check_binary(scores, labels);
    std::vector<size_t> pos_ranks;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i]) pos_ranks.push_back(rank_of(scores, i));
    double sum = 0.0;
    for (size_t ri : pos_ranks) {
        size_t hits = 0;
        for (size_t rj : pos_ranks)
            if (rj <= ri) ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(ri);
    }
    return sum / static_cast<double>(pos_ranks.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels,
               AucTies ties) {
    check_binary(scores, labels);
    double credit = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < labels.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) credit += 1.0;
            else if (scores[i] == scores[j] && ties == AucTies::HALF_CREDIT) credit += 0.5;
        }
    }
    return credit / static_cast<double>(pairs);
}

double precision_at_pi(const std::vector<double>& scores,
                       const std::vector<uint8_t>& labels) {
    check_binary(scores, labels);
    size_t p = count_pos(labels);
    size_t hits = 0;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] && rank_of(scores, i) <= p) ++hits;
    return static_cast<double>(hits) / static_cast<double>(p);
}

double max_f1(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check_binary(scores, labels);
    double best = 0.0;
    for (double thr : scores) {
        size_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < labels.size(); ++i) {
            bool pred = scores[i] >= thr;
            if (pred && labels[i]) ++tp;
            else if (pred && !labels[i]) ++fp;
            else if (!pred && labels[i]) ++fn;
        }
        double f1 = tp == 0 ? 0.0
                            : 2.0 * static_cast<double>(tp) /
                                  static_cast<double>(2 * tp + fp + fn);
        best = std::max(best, f1);
    }
    return best;
}

double wilcoxon_exact(const std::vector<double>& diffs) {
    std::vector<double> d;
    for (double v : diffs)
        if (v != 0.0) d.push_back(v);
    if (d.empty()) throw DataError("reference wilcoxon: all differences are zero");
    size_t n = d.size();
    if (n > 24) throw DataError("reference wilcoxon: enumeration limited to n <= 24");

    std::vector<double> rank(n);
    for (size_t i = 0; i < n; ++i) {
        size_t less = 0, eq = 0;
        for (size_t j = 0; j < n; ++j) {
            if (std::fabs(d[j]) < std::fabs(d[i])) ++less;
            else if (std::fabs(d[j]) == std::fabs(d[i])) ++eq;
        }
        // average rank of the tie block at positions less+1 .. less+eq
        rank[i] = static_cast<double>(less) + 0.5 * static_cast<double>(eq + 1);
    }

    double w_obs = 0.0;
    for (size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w_obs += rank[i];

    uint64_t total = uint64_t{1} << n, at_least = 0;
    for (uint64_t mask = 0; mask < total; ++mask) {
        double w = 0.0;
        for (size_t i = 0; i < n; ++i)
            if (mask & (uint64_t{1} << i)) w += rank[i];
        if (w >= w_obs) ++at_least;
    }
    return static_cast<double>(at_least) / static_cast<double>(total);
}

double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    // T_a and T_b each count every pair tied on that side, pairs tied on both
    // sides included, which is what the tau-b denominator removes.
    uint64_t concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            if (a[i] == a[j]) ++ties_a;
            if (b[i] == b[j]) ++ties_b;
            if (a[i] == a[j] || b[i] == b[j]) continue;
            bool same = (a[i] < a[j]) == (b[i] < b[j]);
            if (same) ++concordant;
            else ++discordant;
        }
    uint64_t n0 = static_cast<uint64_t>(n) * (n - 1) / 2;
    double denom = std::sqrt(static_cast<double>(n0 - ties_a)) *
                   std::sqrt(static_cast<double>(n0 - ties_b));
    if (denom == 0.0) return 0.0;
    return (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    auto ranks = [n](const std::vector<double>& v) {
        std::vector<double> r(n);
        for (size_t i = 0; i < n; ++i) {
            size_t less = 0, eq = 0;
            for (size_t j = 0; j < n; ++j) {
                if (v[j] < v[i]) ++less;
                else if (v[j] == v[i]) ++eq;
            }
            r[i] = static_cast<double>(less) + 0.5 * static_cast<double>(eq - 1) + 1.0;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return num / (std::sqrt(va) * std::sqrt(vb));
}

namespace {

// Sorted (squared distance, index) neighbor rows, self excluded. Same
// comparison convention as the parallel kernel so ties resolve identically.
std::vector<std::vector<std::pair<double, size_t>>> neighbor_rows(const Matrix& X, size_t k,
                                                                  bool manhattan,
                                                                  bool extend_ties) {
    size_t n = X.rows;
    if (k >= n) throw DataError("reference neighbors: k must be < N");
    std::vector<std::vector<std::pair<double, size_t>>> out(n);
    for (size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, size_t>> row;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double dist = 0.0;
            for (size_t c = 0; c < X.cols; ++c) {
                double diff = X.at(i, c) - X.at(j, c);
                dist += manhattan ? std::fabs(diff) : diff * diff;
            }
            row.emplace_back(dist, j);
        }
        std::sort(row.begin(), row.end());
        size_t keep = k;
        if (extend_ties)
            while (keep < row.size() && row[keep].first == row[k - 1].first) ++keep;
        row.resize(keep);
        if (!manhattan)
            for (auto& [dist, idx] : row) dist = std::sqrt(dist);
        out[i] = std::move(row);
    }
    return out;
}

}  // namespace

std::vector<double> knn_scores(const Matrix& X, size_t k, const std::string& method) {
    auto nb = neighbor_rows(X, k, false, false);
    std::vector<double> out(X.rows);
    for (size_t i = 0; i < X.rows; ++i) {
        if (method == "largest") {
            out[i] = nb[i][k - 1].first;
        } else if (method == "mean") {
            double sum = 0.0;
            for (size_t t = 0; t < k; ++t) sum += nb[i][t].first;
            out[i] = sum / static_cast<double>(k);
        } else if (method == "median") {
            out[i] = (k % 2) ? nb[i][k / 2].first
                             : 0.5 * (nb[i][k / 2 - 1].first + nb[i][k / 2].first);
        } else {
            throw DataError("reference knn: unknown method " + method);
        }
    }
    return out;
}

std::vector<double> lof_scores(const Matrix& X, size_t k, bool manhattan) {
    auto nb = neighbor_rows(X, k, manhattan, true);
    size_t n = X.rows;
    std::vector<double> kdist(n), lrd(n), out(n);
    for (size_t i = 0; i < n; ++i) kdist[i] = nb[i][k - 1].first;
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& [dist, j] : nb[i]) sum += std::max(dist, kdist[j]);
        lrd[i] = sum > 0.0 ? static_cast<double>(nb[i].size()) / sum : 1e300;
    }
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& [dist, j] : nb[i]) sum += lrd[j];
        out[i] = sum / (static_cast<double>(nb[i].size()) * lrd[i]);
    }
    return out;
}

std::vector<std::string> rollout_trajectory(const ScoreMatrix& sm,
                                            const std::vector<uint8_t>& labels, size_t eta) {
    std::vector<std::string> ids = sm.model_ids;
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw DataError("reference rollout: no columns");

    auto mean_of = [&](const std::vector<std::string>& members) {
        std::vector<double> m(sm.scores.rows, 0.0);
        for (const auto& id : members) {
            std::vector<double> c = sm.column(id);
            for (size_t i = 0; i < m.size(); ++i) m[i] += c[i];
        }
        for (double& v : m) v /= static_cast<double>(members.size());
        return m;
    };

    std::vector<std::string> traj;
    std::string best_id;
    double best_ap = -1.0;
    for (const auto& id : ids) {
        double ap = average_precision(sm.column(id), labels);
        if (ap > best_ap) {
            best_ap = ap;
            best_id = id;
        }
    }
    traj.push_back(best_id);

    while (traj.size() < eta && traj.size() < ids.size()) {
        double base = average_precision(mean_of(traj), labels);
        std::string pick;
        double pick_gain = 0.0;
        for (const auto& id : ids) {
            if (std::find(traj.begin(), traj.end(), id) != traj.end()) continue;
            std::vector<std::string> extended = traj;
            extended.push_back(id);
            double gain = average_precision(mean_of(extended), labels) - base;
            if (pick.empty() || gain > pick_gain) {
                pick = id;
                pick_gain = gain;
            }
        }
        if (pick_gain <= 0.0) break;
        traj.push_back(pick);
    }
    return traj;
}

}  // namespace metaens::ref
