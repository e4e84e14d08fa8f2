#include "metaens/meta_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaens/errors.hpp"
#include "metaens/prng.hpp"

namespace metaens {

std::string combiner_name(Combiner c) {
    switch (c) {
        case Combiner::MEAN: return "mean";
        case Combiner::MEDIAN: return "median";
        case Combiner::MAX: return "max";
        case Combiner::MIN: return "min";
    }
    throw InternalError("combiner_name: bad value");
}

Combiner combiner_from_name(const std::string& name) {
    if (name == "mean") return Combiner::MEAN;
    if (name == "median") return Combiner::MEDIAN;
    if (name == "max") return Combiner::MAX;
    if (name == "min") return Combiner::MIN;
    throw DataError("unknown combiner: " + name + " (mean|median|max|min)");
}

double Forest::predict(const StateVector& x) const {
    if (trees.empty()) throw InternalError("predict on empty forest");
    double sum = 0.0;
    for (const auto& tree : trees) {
        size_t node = 0;
        while (tree[node].feature >= 0) {
            node = x[static_cast<size_t>(tree[node].feature)] < tree[node].threshold
                       ? static_cast<size_t>(tree[node].left)
                       : static_cast<size_t>(tree[node].right);
        }
        sum += tree[node].value;
    }
    return sum / static_cast<double>(trees.size());
}

namespace {

constexpr size_t kCandidateFeatures = 8;  // ceil(sqrt(61))

struct TreeBuilder {
    const std::vector<StateVector>& x;
    const std::vector<double>& y;       // class as 0/1 or regression target
    const std::vector<double>& weight;  // per-sample (1.0 for regression)
    bool classification;
    Rng rng;
    std::vector<TreeNode> nodes;
    std::vector<size_t> order;    // index workspace, partitioned in place
    std::vector<size_t> scratch;  // right-side buffer for stable splits

    TreeBuilder(const std::vector<StateVector>& x_, const std::vector<double>& y_,
                const std::vector<double>& w_, bool cls, uint64_t seed)
        : x(x_), y(y_), weight(w_), classification(cls), rng(seed) {
        order.resize(x.size());
        std::iota(order.begin(), order.end(), size_t{0});
        nodes.emplace_back();
        build(0, 0, order.size());
    }

    // Weighted impurity mass: Gini * total weight (classification) or SSE
    // (regression). Split quality = parent mass - child masses; both are
    // equivalent to the textbook weighted-reduction criteria.
    double impurity(size_t begin, size_t end) const {
        if (classification) {
            double wp = 0.0, wn = 0.0;
            for (size_t t = begin; t < end; ++t) {
                if (y[order[t]] > 0.5) wp += weight[order[t]];
                else wn += weight[order[t]];
            }
            double w = wp + wn;
            if (w <= 0.0) return 0.0;
            return w * (1.0 - (wp / w) * (wp / w) - (wn / w) * (wn / w));
        }
        double sum = 0.0, sum2 = 0.0;
        for (size_t t = begin; t < end; ++t) {
            sum += y[order[t]];
            sum2 += y[order[t]] * y[order[t]];
        }
        double n = static_cast<double>(end - begin);
        return sum2 - sum * sum / n;
    }

    double leaf_value(size_t begin, size_t end) {
        if (classification) {
            double wp = 0.0, w = 0.0;
            for (size_t t = begin; t < end; ++t) {
                w += weight[order[t]];
                if (y[order[t]] > 0.5) wp += weight[order[t]];
            }
            return w > 0.0 ? wp / w : 0.0;
        }
        std::vector<double> vals;
        vals.reserve(end - begin);
        for (size_t t = begin; t < end; ++t) vals.push_back(y[order[t]]);
        std::sort(vals.begin(), vals.end());
        size_t m = vals.size();
        return (m % 2) ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    }

    bool pure(size_t begin, size_t end) const {
        for (size_t t = begin + 1; t < end; ++t)
            if (y[order[t]] != y[order[begin]]) return false;
        return true;
    }

    // Combined impurity mass of both sides, without reordering anything.
    double split_mass(size_t begin, size_t end, size_t f, double thr) const {
        if (classification) {
            double wp_l = 0.0, wn_l = 0.0, wp_r = 0.0, wn_r = 0.0;
            for (size_t t = begin; t < end; ++t) {
                size_t r = order[t];
                bool left = x[r][f] < thr;
                if (y[r] > 0.5) (left ? wp_l : wp_r) += weight[r];
                else (left ? wn_l : wn_r) += weight[r];
            }
            auto gini_mass = [](double wp, double wn) {
                double w = wp + wn;
                if (w <= 0.0) return 0.0;
                return w * (1.0 - (wp / w) * (wp / w) - (wn / w) * (wn / w));
            };
            return gini_mass(wp_l, wn_l) + gini_mass(wp_r, wn_r);
        }
        double s_l = 0.0, s2_l = 0.0, n_l = 0.0, s_r = 0.0, s2_r = 0.0, n_r = 0.0;
        for (size_t t = begin; t < end; ++t) {
            size_t r = order[t];
            double v = y[r];
            if (x[r][f] < thr) {
                s_l += v;
                s2_l += v * v;
                n_l += 1.0;
            } else {
                s_r += v;
                s2_r += v * v;
                n_r += 1.0;
            }
        }
        double mass = 0.0;
        if (n_l > 0.0) mass += s2_l - s_l * s_l / n_l;
        if (n_r > 0.0) mass += s2_r - s_r * s_r / n_r;
        return mass;
    }

    // Stable two-way split of order[begin, end); returns the boundary.
    size_t stable_split(size_t begin, size_t end, size_t f, double thr) {
        scratch.clear();
        size_t write = begin;
        for (size_t t = begin; t < end; ++t) {
            size_t r = order[t];
            if (x[r][f] < thr) order[write++] = r;
            else scratch.push_back(r);
        }
        std::copy(scratch.begin(), scratch.end(), order.begin() + static_cast<long>(write));
        return write;
    }

    void build(int node, size_t begin, size_t end) {
        if (end - begin < 2 || pure(begin, end)) {
            nodes[node].value = leaf_value(begin, end);
            return;
        }

        // Features that actually vary inside this node.
        std::array<uint16_t, kStateDim> varying{};
        size_t n_varying = 0;
        for (size_t f = 0; f < kStateDim; ++f) {
            double v0 = x[order[begin]][f];
            for (size_t t = begin + 1; t < end; ++t) {
                if (x[order[t]][f] != v0) {
                    varying[n_varying++] = static_cast<uint16_t>(f);
                    break;
                }
            }
        }
        if (n_varying == 0) {
            nodes[node].value = leaf_value(begin, end);
            return;
        }

        // Draw up to K distinct varying features; one uniform threshold each.
        std::array<uint16_t, kCandidateFeatures> picks{};
        size_t n_picks = std::min(kCandidateFeatures, n_varying);
        for (size_t i = 0; i < n_picks; ++i) {
            size_t j = i + static_cast<size_t>(rng.below(n_varying - i));
            std::swap(varying[i], varying[j]);
            picks[i] = varying[i];
        }

        double parent_mass = impurity(begin, end);
        double best_score = -1.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (size_t i = 0; i < n_picks; ++i) {
            size_t f = picks[i];
            double lo = x[order[begin]][f], hi = lo;
            for (size_t t = begin + 1; t < end; ++t) {
                double v = x[order[t]][f];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            double thr = rng.uniform(lo, hi);
            if (!(thr > lo)) continue;  // uniform() may land exactly on lo
            double score = parent_mass - split_mass(begin, end, f, thr);
            if (score > best_score) {
                best_score = score;
                best_feature = static_cast<int>(f);
                best_threshold = thr;
            }
        }
        if (best_feature < 0) {
            nodes[node].value = leaf_value(begin, end);
            return;
        }

        size_t mid = stable_split(begin, end, static_cast<size_t>(best_feature), best_threshold);

        nodes[node].feature = best_feature;
        nodes[node].threshold = best_threshold;
        int left = static_cast<int>(nodes.size());
        nodes.emplace_back();
        int right = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[node].left = left;
        nodes[node].right = right;
        build(left, begin, mid);
        build(right, mid, end);
    }
};

// Canonical sample order: lexicographic by features, then target. Makes
// fitting invariant to the caller's sample order.
template <typename T>
std::vector<size_t> canonical_order(const std::vector<StateVector>& x, const std::vector<T>& y) {
    std::vector<size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });
    return idx;
}

Forest fit_forest(const std::vector<StateVector>& x, const std::vector<double>& y,
                  const std::vector<double>& w, bool classification, ForestKind kind,
                  size_t n_trees, uint64_t seed) {
    Forest forest;
    forest.kind = kind;
    forest.n_trees = n_trees;
    forest.seed = seed;
    forest.trees.resize(n_trees);
#pragma omp parallel for schedule(dynamic)
    for (long long tt = 0; tt < static_cast<long long>(n_trees); ++tt) {
        size_t t = static_cast<size_t>(tt);
        TreeBuilder builder(x, y, w, classification, derive_seed(seed, t));
        forest.trees[t] = std::move(builder.nodes);
    }
    return forest;
}

}  // namespace

Forest fit_classifier(const std::vector<StateVector>& x, const std::vector<uint8_t>& y,
                      size_t n_trees, uint64_t seed) {
    if (x.size() != y.size()) throw DataError("fit_classifier: size mismatch");
    if (x.empty()) throw DataError("fit_classifier: empty input");
    size_t n_pos = 0;
    for (uint8_t v : y) n_pos += v;
    if (n_pos == 0 || n_pos == y.size())
        throw DataError("fit_classifier: need at least one sample of each class");

    auto idx = canonical_order(x, y);
    std::vector<StateVector> xs(x.size());
    std::vector<double> ys(x.size()), ws(x.size());
    double n_total = static_cast<double>(x.size());
    double w_pos = n_total / (2.0 * static_cast<double>(n_pos));
    double w_neg = n_total / (2.0 * static_cast<double>(x.size() - n_pos));
    for (size_t i = 0; i < idx.size(); ++i) {
        xs[i] = x[idx[i]];
        ys[i] = y[idx[i]];
        ws[i] = y[idx[i]] ? w_pos : w_neg;
    }
    return fit_forest(xs, ys, ws, true, ForestKind::MEAN_PROB, n_trees, seed);
}

Forest fit_regressor(const std::vector<StateVector>& x, const std::vector<double>& y,
                     size_t n_trees, uint64_t seed) {
    if (x.size() != y.size()) throw DataError("fit_regressor: size mismatch");
    if (x.empty()) throw DataError("fit_regressor: empty input");
    for (double v : y)
        if (!(v >= 0.0)) throw DataError("fit_regressor: negative or NaN target");

    auto idx = canonical_order(x, y);
    std::vector<StateVector> xs(x.size());
    std::vector<double> ys(x.size());
    std::vector<double> ws(x.size(), 1.0);
    for (size_t i = 0; i < idx.size(); ++i) {
        xs[i] = x[idx[i]];
        ys[i] = y[idx[i]];
    }
    return fit_forest(xs, ys, ws, false, ForestKind::MEDIAN_LEAF, n_trees, seed);
}

double TwoPartGainModel::predict_gain(const StateVector& phi) const {
    if (config.feature_layout_version != kFeatureLayoutVersion)
        throw DataError("model feature layout v" +
                        std::to_string(config.feature_layout_version) +
                        " does not match this build (v" +
                        std::to_string(kFeatureLayoutVersion) + ")");
    for (double v : phi)
        if (!std::isfinite(v)) throw DataError("predict_gain: non-finite state feature");
    return cls.predict(phi) * reg.predict(phi);
}

double TwoPartGainModel::predict_gain(const StateFeatures& phi) const {
    return predict_gain(phi.to_vector());
}

double TwoPartGainModel::risk_of(const std::string& key) const {
    auto it = family_risk.find(key);
    return it == family_risk.end() ? 0.0 : it->second;
}

}  // namespace metaens
