#include "metaens/selector.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "metaens/csv.hpp"
#include "metaens/errors.hpp"
#include "metaens/prng.hpp"
#include "metaens/state_features.hpp"

using json = nlohmann::ordered_json;

namespace metaens {

namespace {

std::vector<std::string> sorted_ids(const ScoreMatrix& sm) {
    std::vector<std::string> ids = sm.model_ids;
    std::sort(ids.begin(), ids.end());
    return ids;
}

void validate_cfg(const ModelConfig& cfg) {
    if (cfg.eta < 1) throw DataError("select: budget eta must be >= 1");
    if (cfg.beta < 0.0) throw DataError("select: beta must be >= 0");
    if (cfg.lambda_fam < 0.0) throw DataError("select: lambda_fam must be >= 0");
}

}  // namespace

std::string primary_select(const ScoreMatrix& sm, const PrimarySpec& spec,
                           const std::map<std::string, double>& meta_perf) {
    if (sm.model_ids.empty()) throw DataError("primary selection: no score columns");
    switch (spec.strategy) {
        case PrimaryStrategy::FIXED:
            sm.col_index(spec.fixed_id);  // throws when absent
            return spec.fixed_id;
        case PrimaryStrategy::RANDOM: {
            std::vector<std::string> ids = sorted_ids(sm);
            Rng rng(spec.seed);
            return ids[static_cast<size_t>(rng.below(ids.size()))];
        }
        case PrimaryStrategy::GLOBAL_BEST:
            break;
    }
    std::string best;
    double best_perf = 0.0;
    for (const std::string& id : sorted_ids(sm)) {
        auto it = meta_perf.find(id);
        if (it == meta_perf.end()) continue;
        if (best.empty() || it->second > best_perf) {
            best = id;
            best_perf = it->second;
        }
    }
    if (best.empty())
        throw DataError("primary selection: GLOBAL_BEST needs meta-corpus AP for at least "
                        "one available column");
    return best;
}

double discount(double beta, double sim_max) { return 1.0 / (1.0 + beta * sim_max); }

double proxy_utility(double g_hat, double gamma, double lambda_fam, double pi_f) {
    return gamma * (g_hat - lambda_fam * pi_f);
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& member_scores,
                              Combiner combiner) {
    if (member_scores.empty()) throw DataError("aggregate: no member scores");
    size_t n = member_scores[0].size();
    for (const auto& s : member_scores)
        if (s.size() != n) throw DataError("aggregate: member score lengths differ");

    std::vector<double> out(n, 0.0);
    if (combiner == Combiner::MEAN) {
        for (const auto& s : member_scores)
            for (size_t i = 0; i < n; ++i) out[i] += s[i];
        for (double& v : out) v /= static_cast<double>(member_scores.size());
        return out;
    }
    std::vector<double> cell(member_scores.size());
    for (size_t i = 0; i < n; ++i) {
        for (size_t m = 0; m < member_scores.size(); ++m) cell[m] = member_scores[m][i];
        switch (combiner) {
            case Combiner::MEDIAN: {
                std::sort(cell.begin(), cell.end());
                size_t mid = cell.size() / 2;
                out[i] = cell.size() % 2 ? cell[mid] : 0.5 * (cell[mid - 1] + cell[mid]);
                break;
            }
            case Combiner::MAX:
                out[i] = *std::max_element(cell.begin(), cell.end());
                break;
            case Combiner::MIN:
                out[i] = *std::min_element(cell.begin(), cell.end());
                break;
            case Combiner::MEAN:
                break;  // handled above
        }
    }
    return out;
}

SelectionResult select(const ScoreMatrix& sm, const ModelPool& pool,
                       const TwoPartGainModel& model, const ModelConfig& cfg,
                       const PrimarySpec& primary) {
    validate_cfg(cfg);
    if (sm.model_ids.empty()) throw DataError("select: score matrix has no columns");
    if (model.config.feature_layout_version != kFeatureLayoutVersion)
        throw InternalError("select: model built against feature layout v" +
                            std::to_string(model.config.feature_layout_version) +
                            ", this build implements v" + std::to_string(kFeatureLayoutVersion));

    SelectionResult res;
    res.dataset_id = sm.dataset_id;
    res.k_top_used = cfg.k_top ? cfg.k_top : default_k_top(sm.scores.rows);

    std::vector<std::string> ids = sorted_ids(sm);
    std::vector<std::vector<double>> col_of(ids.size());
    std::vector<double> risk_of_col(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        col_of[i] = sm.column(ids[i]);
        risk_of_col[i] = model.risk_of(family_key(family_of_id(pool, ids[i]), cfg.family_mode));
    }
    auto index_of = [&](const std::string& id) {
        return static_cast<size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };

    std::string first = primary_select(sm, primary, model.primary_perf);
    res.selected.push_back(first);
    res.trace.push_back({1, first, 0.0, 0.0, 1.0, 0.0, 0.0, true, "primary"});
    std::vector<size_t> members{index_of(first)};
    std::vector<size_t> remaining;
    for (size_t i = 0; i < ids.size(); ++i)
        if (i != members[0]) remaining.push_back(i);

    auto finish = [&](const std::string& reason) {
        res.stop_reason = reason;
        std::vector<std::vector<double>> member_scores;
        for (size_t m : members) member_scores.push_back(col_of[m]);
        res.ensemble_scores = aggregate(member_scores, cfg.combiner);
        return res;
    };

    if (cfg.eta == 1) return finish("budget");

    // Stage 1: predicted gain only; the discount and the risk penalty enter
    // at stage 2.
    {
        size_t nc = remaining.size();
        if (nc == 0) return finish("pool_exhausted");
        std::vector<double> g(nc);
#pragma omp parallel for schedule(dynamic)
        for (size_t i = 0; i < nc; ++i) {
            StateFeatures phi = build_state(sm, ids[remaining[i]], first, res.selected,
                                            res.k_top_used);
            g[i] = model.predict_gain(phi);
        }
        size_t best = 0;
        for (size_t i = 0; i < nc; ++i) {
            res.trace.push_back({2, ids[remaining[i]], g[i], 0.0, 1.0, 0.0, g[i], false, ""});
            if (g[i] > g[best]) best = i;
        }
        if (g[best] < cfg.tau1) {
            res.trace.push_back({2, ids[remaining[best]], g[best], 0.0, 1.0, 0.0, g[best],
                                 false, "tau1_gate"});
            return finish("tau1_gate");
        }
        res.trace[1 + best].accepted = true;
        res.trace[1 + best].note = "best";
        res.selected.push_back(ids[remaining[best]]);
        members.push_back(remaining[best]);
        remaining.erase(remaining.begin() + static_cast<ptrdiff_t>(best));
    }

    // Stage 2: discounted, risk-penalized utility; accept while strictly
    // positive and the budget allows.
    while (members.size() < cfg.eta) {
        if (remaining.empty()) return finish("pool_exhausted");
        size_t step = members.size() + 1;
        const std::string& last = res.selected.back();
        size_t nc = remaining.size();
        std::vector<TraceRow> rows(nc);
#pragma omp parallel for schedule(dynamic)
        for (size_t i = 0; i < nc; ++i) {
            size_t c = remaining[i];
            TraceRow& r = rows[i];
            r.step = step;
            r.candidate = ids[c];
            StateFeatures phi = build_state(sm, ids[c], last, res.selected, res.k_top_used);
            r.g_hat = model.predict_gain(phi);
            if (r.g_hat < cfg.tau2) {
                r.note = "below_tau2";  // sim/gamma/penalty stay at neutral defaults
                continue;
            }
            double sim = 0.0;
            for (size_t m : members)
                sim = std::max(sim, jaccard_top_k(col_of[c], col_of[m], res.k_top_used));
            r.sim_max = sim;
            r.gamma = discount(cfg.beta, sim);
            r.penalty = cfg.lambda_fam * risk_of_col[c];
            r.delta_u = proxy_utility(r.g_hat, r.gamma, cfg.lambda_fam, risk_of_col[c]);
        }

        double u_best = 0.0;  // acceptance requires strictly positive utility
        size_t best = nc;
        for (size_t i = 0; i < nc; ++i) {
            res.trace.push_back(rows[i]);
            if (rows[i].note.empty() && rows[i].delta_u > u_best) {
                u_best = rows[i].delta_u;
                best = i;
            }
        }
        if (best == nc) return finish("no_positive_utility");
        res.trace[res.trace.size() - nc + best].accepted = true;
        res.trace[res.trace.size() - nc + best].note = "best";
        res.selected.push_back(ids[remaining[best]]);
        members.push_back(remaining[best]);
        remaining.erase(remaining.begin() + static_cast<ptrdiff_t>(best));
    }
    return finish("budget");
}

void write_scores_csv(const std::vector<double>& scores, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << "score\n";
    for (double s : scores) f << format_double(s) << "\n";
    if (!f) throw DataError("write failed: " + path);
}

void write_selection_json(const SelectionResult& res, const ModelConfig& cfg,
                          const std::string& scores_path, const std::string& json_path) {
    json doc;
    doc["tool_version"] = kToolVersion;
    doc["dataset_id"] = res.dataset_id;
    doc["selected"] = res.selected;
    doc["stop_reason"] = res.stop_reason;
    doc["k_top_used"] = res.k_top_used;
    json cfg_echo;
    cfg_echo["tau1"] = cfg.tau1;
    cfg_echo["tau2"] = cfg.tau2;
    cfg_echo["beta"] = cfg.beta;
    cfg_echo["lambda_fam"] = cfg.lambda_fam;
    cfg_echo["k_top"] = cfg.k_top;
    cfg_echo["eta"] = cfg.eta;
    cfg_echo["combiner"] = combiner_name(cfg.combiner);
    cfg_echo["risk_percentile"] = cfg.risk_percentile;
    cfg_echo["family_mode"] = cfg.family_mode == FamilyMode::FINE ? "fine" : "coarse";
    doc["config"] = cfg_echo;
    json trace = json::array();
    for (const TraceRow& r : res.trace) {
        json row;
        row["step"] = r.step;
        row["candidate"] = r.candidate;
        row["g_hat"] = r.g_hat;
        row["sim_max"] = r.sim_max;
        row["gamma"] = r.gamma;
        row["penalty"] = r.penalty;
        row["delta_u"] = r.delta_u;
        row["accepted"] = r.accepted;
        row["note"] = r.note;
        trace.push_back(row);
    }
    doc["trace"] = trace;
    doc["ensemble_scores_path"] = scores_path;
    std::ofstream f(json_path);
    if (!f) throw DataError("cannot write " + json_path);
    f << doc.dump(2) << "\n";
    if (!f) throw DataError("write failed: " + json_path);
}

void dump_similarity_csv(const ScoreMatrix& sm, size_t k_top, const std::string& path) {
    std::vector<std::string> ids = sorted_ids(sm);
    size_t n = ids.size();
    size_t k = k_top ? k_top : default_k_top(sm.scores.rows);
    std::vector<std::vector<double>> cols(n);
    for (size_t i = 0; i < n; ++i) cols[i] = sm.column(ids[i]);

    std::vector<double> sim(n * n, 1.0);
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double v = jaccard_top_k(cols[i], cols[j], k);
            sim[i * n + j] = v;
            sim[j * n + i] = v;
        }

    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << "id";
    for (const auto& id : ids) f << "," << id;
    f << "\n";
    for (size_t i = 0; i < n; ++i) {
        f << ids[i];
        for (size_t j = 0; j < n; ++j) f << "," << format_double(sim[i * n + j]);
        f << "\n";
    }
    if (!f) throw DataError("write failed: " + path);
}

}  // namespace metaens
