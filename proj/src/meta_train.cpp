#include "metaens/meta_train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <utility>

#include "metaens/csv.hpp"
#include "metaens/errors.hpp"
#include "metaens/metrics.hpp"
#include "metaens/prng.hpp"
#include "metaens/selector.hpp"
#include "metaens/state_features.hpp"

namespace metaens {

namespace {

// Column indices of sm sorted by ascending model id. compute_scores emits
// sorted columns already, but injected external columns land at the end.
std::vector<size_t> ascending_columns(const ScoreMatrix& sm) {
    std::vector<size_t> order(sm.model_ids.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return sm.model_ids[a] < sm.model_ids[b]; });
    return order;
}

std::vector<double> ensemble_mean(const std::vector<std::vector<double>>& cols,
                                  const std::vector<size_t>& members) {
    std::vector<double> out(cols[members[0]].size(), 0.0);
    for (size_t j : members)
        for (size_t i = 0; i < out.size(); ++i) out[i] += cols[j][i];
    for (double& v : out) v /= static_cast<double>(members.size());
    return out;
}

void validate_rollout_cfg(const RolloutConfig& cfg) {
    if (cfg.eta < 1) throw DataError("rollout: budget eta must be >= 1");
    if (cfg.T > cfg.eta)
        throw DataError("rollout: length T=" + std::to_string(cfg.T) +
                        " exceeds budget eta=" + std::to_string(cfg.eta));
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0))
        throw DataError("rollout: epsilon must lie in [0,1]");
}

}  // namespace

double oracle_gain(const std::vector<double>& ensemble_score,
                   const std::vector<double>& candidate_score, size_t ensemble_size,
                   const std::vector<uint8_t>& labels) {
    if (ensemble_score.size() != candidate_score.size() ||
        ensemble_score.size() != labels.size())
        throw DataError("oracle gain: score/label length mismatch");
    if (ensemble_size == 0) throw DataError("oracle gain: empty ensemble");
    double k = static_cast<double>(ensemble_size);
    std::vector<double> extended(ensemble_score.size());
    for (size_t i = 0; i < extended.size(); ++i)
        extended[i] = (k * ensemble_score[i] + candidate_score[i]) / (k + 1.0);
    return average_precision(extended, labels) - average_precision(ensemble_score, labels);
}

RolloutResult rollout(const ScoreMatrix& sm, const std::vector<uint8_t>& labels,
                      const ModelPool& pool, const RolloutConfig& cfg, size_t k_top) {
    validate_rollout_cfg(cfg);
    if (pool.specs.empty()) throw DataError("rollout: empty pool");
    if (sm.model_ids.empty()) throw DataError("rollout: score matrix has no columns");
    if (labels.size() != sm.scores.rows)
        throw DataError("rollout on " + sm.dataset_id + ": " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(sm.scores.rows) + " rows");
    size_t k = k_top ? k_top : default_k_top(sm.scores.rows);

    std::vector<size_t> order = ascending_columns(sm);
    std::vector<std::vector<double>> cols(sm.model_ids.size());
    std::vector<std::string> fam(sm.model_ids.size());
    for (size_t j : order) {
        cols[j] = sm.scores.col(j);
        fam[j] = family_key(family_of_id(pool, sm.model_ids[j]), pool.mode);
    }

    // Oracle primary: AP argmax, first (lowest id) wins ties.
    size_t primary = order[0];
    double best_ap = -1.0;
    for (size_t j : order) {
        double ap = average_precision(cols[j], labels);
        if (ap > best_ap) {
            best_ap = ap;
            primary = j;
        }
    }

    RolloutResult out;
    out.trajectory.push_back(sm.model_ids[primary]);
    std::vector<size_t> members{primary};
    std::vector<size_t> remaining;
    for (size_t j : order)
        if (j != primary) remaining.push_back(j);

    Rng rng(cfg.seed);
    size_t cap = std::min(cfg.eta, cfg.length());
    while (members.size() < cap && !remaining.empty()) {
        size_t step = members.size() + 1;
        const std::string& last_id = out.trajectory.back();
        std::vector<double> ens = ensemble_mean(cols, members);

        size_t nc = remaining.size();
        std::vector<GainSample> step_samples(nc);
#pragma omp parallel for schedule(dynamic)
        for (size_t i = 0; i < nc; ++i) {
            size_t j = remaining[i];
            GainSample& s = step_samples[i];
            s.phi = build_state(sm, sm.model_ids[j], last_id, out.trajectory, k).to_vector();
            s.gain = oracle_gain(ens, cols[j], members.size(), labels);
            s.dataset_id = sm.dataset_id;
            s.step = step;
            s.family = fam[j];
        }

        size_t best = 0;
        for (size_t i = 1; i < nc; ++i)
            if (step_samples[i].gain > step_samples[best].gain) best = i;

        out.samples.insert(out.samples.end(), step_samples.begin(), step_samples.end());
        if (step_samples[best].gain <= 0.0) break;  // samples above are kept

        size_t pick = best;
        if (cfg.epsilon > 0.0 && rng.uniform() < cfg.epsilon)
            pick = static_cast<size_t>(rng.below(nc));
        members.push_back(remaining[pick]);
        out.trajectory.push_back(sm.model_ids[remaining[pick]]);
        remaining.erase(remaining.begin() + static_cast<ptrdiff_t>(pick));
    }
    return out;
}

double FamilyRiskTable::lookup(const std::string& family_key) const {
    auto it = pi.find(family_key);
    return it == pi.end() ? 0.0 : it->second;
}

HarvestResult harvest(const std::vector<MetaDataset>& meta, const ModelPool& pool,
                      const RolloutConfig& cfg, size_t k_top, double risk_percentile) {
    if (meta.empty()) throw DataError("harvest: need at least one labeled meta-dataset");
    if (!(risk_percentile >= 0.0 && risk_percentile <= 1.0))
        throw DataError("harvest: risk percentile must lie in [0,1]");

    std::vector<size_t> order(meta.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return meta[a].sm.dataset_id < meta[b].sm.dataset_id;
    });

    std::vector<RolloutResult> per_ds(meta.size());
    std::vector<std::exception_ptr> errors(meta.size());
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 0; i < meta.size(); ++i) {
        try {
            RolloutConfig c = cfg;
            c.seed = derive_seed(cfg.seed, fnv1a64_str(meta[i].sm.dataset_id));
            per_ds[i] = rollout(meta[i].sm, meta[i].labels, pool, c, k_top);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (size_t i : order)
        if (errors[i]) std::rethrow_exception(errors[i]);

    HarvestResult out;
    out.risk.risk_percentile = risk_percentile;
    std::map<std::string, std::vector<double>> by_family;
    for (const auto& spec : pool.specs) by_family[family_key(spec.family, pool.mode)];

    for (size_t i : order) {
        for (const GainSample& s : per_ds[i].samples) {
            out.cls_x.push_back(s.phi);
            out.cls_y.push_back(s.gain > 0.0 ? 1 : 0);
            if (s.gain > 0.0) {
                out.reg_x.push_back(s.phi);
                out.reg_y.push_back(s.gain);
            }
            by_family[s.family].push_back(s.gain);
            out.samples.push_back(s);
        }
    }

    for (auto& [key, gains] : by_family) {
        out.risk.counts[key] = gains.size();
        if (gains.empty()) {
            out.risk.pi[key] = 0.0;  // no evidence: neutral, not risky
            continue;
        }
        std::sort(gains.begin(), gains.end());
        out.risk.pi[key] = std::max(0.0, -quantile_sorted(gains, risk_percentile));
    }
    return out;
}

void dump_gains_csv(const std::vector<GainSample>& samples, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    for (size_t j = 0; j < kStateDim; ++j) f << "phi_" << j << ",";
    f << "gain,dataset_id,step,family\n";
    for (const GainSample& s : samples) {
        for (size_t j = 0; j < kStateDim; ++j) f << format_double(s.phi[j]) << ",";
        f << format_double(s.gain) << "," << s.dataset_id << "," << s.step << "," << s.family
          << "\n";
    }
    if (!f) throw DataError("write failed: " + path);
}

std::map<std::string, double> mean_ap_per_model(const std::vector<MetaDataset>& meta) {
    std::map<std::string, std::pair<double, size_t>> acc;
    for (const auto& md : meta) {
        for (size_t j = 0; j < md.sm.model_ids.size(); ++j) {
            double ap = average_precision(md.sm.scores.col(j), md.labels);
            auto& slot = acc[md.sm.model_ids[j]];
            slot.first += ap;
            slot.second += 1;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [id, slot] : acc) out[id] = slot.first / static_cast<double>(slot.second);
    return out;
}

TwoPartGainModel meta_train(const std::vector<MetaDataset>& meta, const ModelPool& pool,
                            const MetaTrainConfig& cfg, const ModelConfig& snapshot,
                            HarvestResult* harvest_out) {
    HarvestResult h = harvest(meta, pool, cfg.rollout, cfg.k_top, cfg.risk_percentile);
    if (h.cls_x.empty())
        throw DataError("meta-train: no gain samples harvested; raise eta or grow the pool");

    TwoPartGainModel m;
    m.cls = fit_classifier(h.cls_x, h.cls_y, cfg.n_trees_cls,
                           derive_seed(cfg.model_seed, fnv1a64_str("cls")));
    m.reg = fit_regressor(h.reg_x, h.reg_y, cfg.n_trees_reg,
                          derive_seed(cfg.model_seed, fnv1a64_str("reg")));
    m.family_risk = h.risk.pi;
    m.family_counts = h.risk.counts;
    m.primary_perf = mean_ap_per_model(meta);
    m.config = snapshot;
    m.config.family_mode = pool.mode;
    m.config.risk_percentile = cfg.risk_percentile;
    m.config.k_top = cfg.k_top;
    m.config.feature_layout_version = kFeatureLayoutVersion;
    if (harvest_out) *harvest_out = std::move(h);
    return m;
}

TuneGrids default_tune_grids() {
    TuneGrids g;
    g.tau_pairs = {{-0.01, -0.01}, {0.0, 0.0},   {0.001, 0.005},
                   {0.01, 0.01},   {0.05, 0.05}, {0.1, 0.1}};
    g.betas = {0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0};
    g.lambdas = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5};
    return g;
}

TuneResult lodo_tune(const std::vector<MetaDataset>& meta, const ModelPool& pool,
                     const TuneGrids& grids, const MetaTrainConfig& cfg,
                     const ModelConfig& snapshot) {
    if (meta.size() < 2) throw DataError("lodo tuning needs at least 2 meta-datasets");
    if (grids.tau_pairs.empty() || grids.betas.empty() || grids.lambdas.empty())
        throw DataError("lodo tuning: empty grid");

    std::vector<size_t> order(meta.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return meta[a].sm.dataset_id < meta[b].sm.dataset_id;
    });

    // Rollout samples per dataset do not depend on which dataset is held out,
    // so run them once up front.
    std::vector<RolloutResult> per_ds(meta.size());
    std::vector<std::exception_ptr> errors(meta.size());
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 0; i < meta.size(); ++i) {
        try {
            RolloutConfig c = cfg.rollout;
            c.seed = derive_seed(cfg.rollout.seed, fnv1a64_str(meta[i].sm.dataset_id));
            per_ds[i] = rollout(meta[i].sm, meta[i].labels, pool, c, cfg.k_top);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (size_t i : order)
        if (errors[i]) std::rethrow_exception(errors[i]);

    std::vector<TuneResult> points;
    for (const auto& [t1, t2] : grids.tau_pairs)
        for (double b : grids.betas)
            for (double l : grids.lambdas) points.push_back({t1, t2, b, l, 0.0});

    for (size_t h : order) {
        // Train on everything but h; the forests and risk table do not vary
        // with the grid point, so fit once per held-out dataset.
        std::vector<StateVector> cls_x, reg_x;
        std::vector<uint8_t> cls_y;
        std::vector<double> reg_y;
        std::map<std::string, std::vector<double>> by_family;
        for (const auto& spec : pool.specs) by_family[family_key(spec.family, pool.mode)];
        std::vector<MetaDataset> rest;
        for (size_t i : order) {
            if (i == h) continue;
            rest.push_back(meta[i]);
            for (const GainSample& s : per_ds[i].samples) {
                cls_x.push_back(s.phi);
                cls_y.push_back(s.gain > 0.0 ? 1 : 0);
                if (s.gain > 0.0) {
                    reg_x.push_back(s.phi);
                    reg_y.push_back(s.gain);
                }
                by_family[s.family].push_back(s.gain);
            }
        }
        if (cls_x.empty())
            throw DataError("lodo tuning: no gain samples with " + meta[h].sm.dataset_id +
                            " held out");

        TwoPartGainModel model;
        uint64_t seed_h = derive_seed(cfg.model_seed, fnv1a64_str(meta[h].sm.dataset_id));
        model.cls = fit_classifier(cls_x, cls_y, cfg.n_trees_cls,
                                   derive_seed(seed_h, fnv1a64_str("cls")));
        model.reg = fit_regressor(reg_x, reg_y, cfg.n_trees_reg,
                                  derive_seed(seed_h, fnv1a64_str("reg")));
        for (auto& [key, gains] : by_family) {
            model.family_counts[key] = gains.size();
            if (gains.empty()) {
                model.family_risk[key] = 0.0;
                continue;
            }
            std::sort(gains.begin(), gains.end());
            model.family_risk[key] =
                std::max(0.0, -quantile_sorted(gains, cfg.risk_percentile));
        }
        model.primary_perf = mean_ap_per_model(rest);
        model.config = snapshot;
        model.config.family_mode = pool.mode;
        model.config.risk_percentile = cfg.risk_percentile;
        model.config.k_top = cfg.k_top;

        PrimarySpec primary;  // GLOBAL_BEST
        for (TuneResult& p : points) {
            ModelConfig c = model.config;
            c.tau1 = p.tau1;
            c.tau2 = p.tau2;
            c.beta = p.beta;
            c.lambda_fam = p.lambda_fam;
            SelectionResult res = select(meta[h].sm, pool, model, c, primary);
            p.mean_ap += average_precision(res.ensemble_scores, meta[h].labels);
        }
    }

    // Mean over held-out datasets; ties prefer the point closest to the
    // defaults, then the lexicographically smallest tuple.
    auto dist2 = [](const TuneResult& p) {
        double d1 = p.tau1 - 0.001, d2 = p.tau2 - 0.005, d3 = p.beta - 3.0,
               d4 = p.lambda_fam - 0.2;
        return d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4;
    };
    auto lex_less = [](const TuneResult& a, const TuneResult& b) {
        if (a.tau1 != b.tau1) return a.tau1 < b.tau1;
        if (a.tau2 != b.tau2) return a.tau2 < b.tau2;
        if (a.beta != b.beta) return a.beta < b.beta;
        return a.lambda_fam < b.lambda_fam;
    };
    size_t best = 0;
    for (TuneResult& p : points) p.mean_ap /= static_cast<double>(meta.size());
    for (size_t i = 1; i < points.size(); ++i) {
        const TuneResult &a = points[i], &b = points[best];
        if (a.mean_ap > b.mean_ap ||
            (a.mean_ap == b.mean_ap &&
             (dist2(a) < dist2(b) || (dist2(a) == dist2(b) && lex_less(a, b)))))
            best = i;
    }
    return points[best];
}

}  // namespace metaens
