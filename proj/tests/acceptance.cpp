// Acceptance harness: runs the ten release criteria and prints one
// "criterion N: pass|FAIL" line each. Criteria 1-7 exercise the library
// directly; 8-10 drive the CLI binary given as argv[1]. Exits nonzero if any
// criterion fails. Timed criteria fail when they blow their budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metaens/dataset.hpp"
#include "metaens/detectors.hpp"
#include "metaens/errors.hpp"
#include "metaens/meta_model.hpp"
#include "metaens/meta_train.hpp"
#include "metaens/metrics.hpp"
#include "metaens/prng.hpp"
#include "metaens/reference.hpp"
#include "metaens/score_cache.hpp"
#include "metaens/selector.hpp"
#include "metaens/state_features.hpp"

namespace fs = std::filesystem;
using namespace metaens;

namespace {

std::string g_cli;
fs::path g_work;

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw DataError("cannot open " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string tail_of(const fs::path& log, size_t lines = 4) {
    std::ifstream f(log);
    std::vector<std::string> all;
    std::string line;
    while (std::getline(f, line)) all.push_back(line);
    std::string out;
    size_t start = all.size() > lines ? all.size() - lines : 0;
    for (size_t i = start; i < all.size(); ++i) out += (out.empty() ? "" : " | ") + all[i];
    return out;
}

void run_cli(const std::string& args, const std::string& tag) {
    fs::path log = g_work / (tag + ".log");
    std::string cmd = g_cli + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    if (status != 0)
        throw DataError("cli failed (" + tag + ", status " + std::to_string(status) +
                        "): " + tail_of(log));
}

// Random labeled scoring problem; both classes guaranteed, optional score
// ties from snapping to a coarse grid.
struct Case {
    std::vector<double> scores;
    std::vector<uint8_t> labels;
};

Case random_case(Rng& rng, size_t max_n, bool ties) {
    size_t n = 2 + static_cast<size_t>(rng.below(max_n - 1));
    Case c;
    c.scores.resize(n);
    c.labels.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double v = rng.uniform();
        if (ties && rng.uniform() < 0.5) v = std::floor(v * 4.0) / 4.0;
        c.scores[i] = v;
        c.labels[i] = static_cast<uint8_t>(rng.below(2));
    }
    c.labels[0] = 1;
    c.labels[n - 1] = 0;
    return c;
}

ScoreMatrix random_matrix(Rng& rng, const std::string& id,
                          const std::vector<std::string>& ids, size_t n) {
    ScoreMatrix sm;
    sm.dataset_id = id;
    sm.model_ids = ids;
    sm.scores = Matrix(n, ids.size());
    for (size_t c = 0; c < ids.size(); ++c) {
        std::vector<double> col(n);
        for (auto& v : col) v = rng.uniform();
        col = normalize_scores(col);
        for (size_t r = 0; r < n; ++r) sm.scores.at(r, c) = col[r];
    }
    return sm;
}

std::vector<uint8_t> random_labels(Rng& rng, size_t n) {
    std::vector<uint8_t> y(n);
    for (auto& v : y) v = rng.uniform() < 0.25 ? 1 : 0;
    y[0] = 1;
    y[n - 1] = 0;
    return y;
}

Forest leaf_forest(ForestKind kind, double v) {
    Forest f;
    f.kind = kind;
    f.n_trees = 1;
    f.trees = {{TreeNode{-1, 0.0, -1, -1, v}}};
    return f;
}

TwoPartGainModel rigged_model(double g) {
    TwoPartGainModel m;
    m.cls = leaf_forest(ForestKind::MEAN_PROB, 1.0);
    m.reg = leaf_forest(ForestKind::MEDIAN_LEAF, g);
    return m;
}

// Rollout requires a non-empty pool; families of non-member columns resolve
// from their id prefixes, so two specs suffice.
ModelPool tiny_pool() {
    ModelPool p;
    p.specs = {make_spec(Family::KNN, {{"k", "5"}, {"method", "mean"}}, 42),
               make_spec(Family::HBOS, {{"bins", "10"}, {"tol", "0.5"}}, 42)};
    return p;
}

ScoreMatrix columns_matrix(const std::string& id, const std::vector<std::string>& ids,
                           const std::vector<std::vector<double>>& cols) {
    ScoreMatrix sm;
    sm.dataset_id = id;
    sm.model_ids = ids;
    sm.scores = Matrix(cols[0].size(), cols.size());
    for (size_t c = 0; c < cols.size(); ++c)
        for (size_t r = 0; r < cols[c].size(); ++r) sm.scores.at(r, c) = cols[c][r];
    return sm;
}

std::string fmt_g(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

// --------------------------------------------------------------------------
// criterion 1: ranking metrics vs pair-counting references

std::string c1() {
    Rng rng(1001);
    for (int i = 0; i < 1000; ++i) {
        Case c = random_case(rng, 30, true);
        struct Probe {
            const char* name;
            double fast, ref;
        } probes[] = {
            {"ap", average_precision(c.scores, c.labels),
             ref::average_precision(c.scores, c.labels)},
            {"p@pi", precision_at_pi(c.scores, c.labels),
             ref::precision_at_pi(c.scores, c.labels)},
            {"max_f1", max_f1(c.scores, c.labels), ref::max_f1(c.scores, c.labels)},
            {"auc", roc_auc(c.scores, c.labels, AucTies::HALF_CREDIT),
             ref::roc_auc(c.scores, c.labels, AucTies::HALF_CREDIT)},
        };
        for (const auto& p : probes)
            if (std::fabs(p.fast - p.ref) > 1e-12)
                return std::string(p.name) + " case " + std::to_string(i) + ": fast " +
                       fmt_g(p.fast) + " vs ref " + fmt_g(p.ref);
    }
    return "";
}

// --------------------------------------------------------------------------
// criterion 2: wilcoxon exact branch vs full sign enumeration

std::string c2() {
    Rng rng(1002);
    for (int i = 0; i < 500; ++i) {
        size_t n = 1 + static_cast<size_t>(rng.below(12));
        std::vector<double> d(n);
        std::set<double> mags;
        for (auto& v : d) {
            do {
                v = rng.uniform(-1.0, 1.0);
            } while (v == 0.0 || !mags.insert(std::fabs(v)).second);
        }
        double fast = wilcoxon_signed_rank(d);
        double exact = ref::wilcoxon_exact(d);
        if (fast != exact)
            return "case " + std::to_string(i) + " (n=" + std::to_string(n) + "): fast " +
                   fmt_g(fast) + " vs enumeration " + fmt_g(exact);
    }
    return "";
}

// --------------------------------------------------------------------------
// criterion 3: greedy rollout vs from-scratch re-implementation

std::string c3() {
    const char* prefixes[] = {"knn_c", "lof_c", "hbos_c", "iforest_c", "abod_c", "cof_c"};
    Rng rng(1003);
    for (int i = 0; i < 100; ++i) {
        size_t n = 5 + static_cast<size_t>(rng.below(36));
        size_t k = 2 + static_cast<size_t>(rng.below(5));
        size_t eta = 1 + static_cast<size_t>(rng.below(3));
        std::vector<std::string> ids;
        for (size_t c = 0; c < k; ++c) ids.push_back(std::string(prefixes[c]) + std::to_string(c));
        ScoreMatrix sm = random_matrix(rng, "roll" + std::to_string(i), ids, n);
        std::vector<uint8_t> y = random_labels(rng, n);

        RolloutConfig cfg{eta, 0, 0.0, 0};
        RolloutResult rr = rollout(sm, y, tiny_pool(), cfg);
        std::vector<std::string> want = ref::rollout_trajectory(sm, y, eta);
        if (rr.trajectory != want)
            return "problem " + std::to_string(i) + ": trajectory diverges at step " +
                   std::to_string([&] {
                       size_t s = 0;
                       while (s < rr.trajectory.size() && s < want.size() &&
                              rr.trajectory[s] == want[s])
                           ++s;
                       return s;
                   }());
    }
    return "";
}

// --------------------------------------------------------------------------
// criterion 4: closed-form spot checks

std::string c4() {
    if (discount(3.0, 1.0) != 0.25)
        return "discount(3,1) = " + fmt_g(discount(3.0, 1.0)) + ", want 0.25";
    if (proxy_utility(0.1, 1.0, 0.2, 0.2) != 1.0 * (0.1 - 0.2 * 0.2))
        return "proxy_utility(0.1,1,0.2,0.2) = " + fmt_g(proxy_utility(0.1, 1.0, 0.2, 0.2));
    std::vector<double> gains{-0.5, -0.1, 0.0, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double pi = std::max(0.0, -quantile_sorted(gains, 0.10));
    if (pi != 0.1) return "11-value percentile pi = " + fmt_g(pi) + ", want 0.1";
    return "";
}

// --------------------------------------------------------------------------
// criterion 5: structural invariants

std::string c5() {
    if (kStateDim != 61) return "state dimension is " + std::to_string(kStateDim);

    const std::vector<std::string> universe{"abod_a", "hbos_a", "hbos_b", "iforest_a",
                                            "knn_a",  "knn_b",  "lof_a",  "lof_b"};
    Rng rng(1005);

    // Dimensionality + zero padding at |P| = 1.
    {
        ScoreMatrix sm = random_matrix(rng, "pad", universe, 40);
        StateFeatures s1 = build_state(sm, "knn_b", "knn_a", {"knn_a"}, 10);
        if (s1.to_vector().size() != 61) return "to_vector size != 61";
        for (size_t j = 20; j < 40; ++j)
            if (s1.to_vector()[j] != 0.0) return "|P|=1 last_ens block not zero-padded";
        StateFeatures s3 = build_state(sm, "lof_b", "hbos_a", {"knn_a", "lof_a", "hbos_a"}, 10);
        if (s3.to_vector().size() != 61 || s3.ensemble_size != 3.0)
            return "|P|=3 state malformed";
    }

    // Pooled blocks must not depend on the member ordering handed in.
    for (int i = 0; i < 1000; ++i) {
        ScoreMatrix sm = random_matrix(rng, "perm" + std::to_string(i), universe,
                                       15 + static_cast<size_t>(rng.below(30)));
        std::vector<std::string> members{"knn_a", "lof_a", "hbos_a", "abod_a"};
        StateFeatures a = build_state(sm, "knn_b", "lof_a", members, 10);
        rng.shuffle(members);
        StateFeatures b = build_state(sm, "knn_b", "lof_a", members, 10);
        if (a.to_vector() != b.to_vector())
            return "state depends on member order (case " + std::to_string(i) + ")";
    }

    // A real (small) trained model for the budget and nonnegativity probes.
    std::vector<MetaDataset> meta;
    for (int d = 0; d < 3; ++d) {
        size_t n = 30 + static_cast<size_t>(rng.below(20));
        meta.push_back({random_matrix(rng, "meta" + std::to_string(d), universe, n),
                        random_labels(rng, n)});
    }
    MetaTrainConfig tcfg;
    tcfg.rollout = {4, 0, 0.0, 7};
    tcfg.n_trees_cls = 30;
    tcfg.n_trees_reg = 30;
    tcfg.model_seed = 7;
    TwoPartGainModel model = meta_train(meta, tiny_pool(), tcfg, ModelConfig{});

    const double taus[] = {-0.01, 0.0, 0.001, 0.01};
    for (int i = 0; i < 1000; ++i) {
        size_t k = 2 + static_cast<size_t>(rng.below(7));
        std::vector<std::string> ids = universe;
        rng.shuffle(ids);
        ids.resize(k);
        std::sort(ids.begin(), ids.end());
        size_t n = 12 + static_cast<size_t>(rng.below(20));
        ScoreMatrix sm = random_matrix(rng, "sel" + std::to_string(i), ids, n);

        ModelConfig cfg = model.config;
        cfg.eta = 1 + static_cast<size_t>(rng.below(6));
        cfg.tau1 = taus[rng.below(4)];
        cfg.tau2 = taus[rng.below(4)];
        cfg.beta = rng.below(2) ? 3.0 : 0.0;
        cfg.lambda_fam = rng.below(2) ? 0.2 : 0.0;
        SelectionResult res = select(sm, ModelPool{}, model, cfg, PrimarySpec{});

        if (res.selected.empty() || res.selected.size() > cfg.eta)
            return "selection size " + std::to_string(res.selected.size()) + " vs eta " +
                   std::to_string(cfg.eta);
        std::set<std::string> uniq(res.selected.begin(), res.selected.end());
        if (uniq.size() != res.selected.size())
            return "duplicate member (case " + std::to_string(i) + ")";
        if (res.stop_reason.empty()) return "empty stop reason";
    }

    for (int i = 0; i < 10000; ++i) {
        StateVector phi;
        for (auto& v : phi) v = rng.uniform(-3.0, 3.0);
        if (!(model.predict_gain(phi) >= 0.0))
            return "negative predicted gain (case " + std::to_string(i) + ")";
    }
    return "";
}

// --------------------------------------------------------------------------
// criterion 6: both early-stop paths, visible in the trace

std::string c6() {
    std::vector<double> prim(20), other(20);
    for (size_t i = 0; i < 20; ++i) {
        prim[i] = i < 10 ? 0.9 + 0.005 * static_cast<double>(i) : 0.01 * static_cast<double>(i);
        other[i] = i < 10 ? 0.01 * static_cast<double>(i) : 0.9 + 0.005 * static_cast<double>(i);
    }
    std::vector<double> other2 = other;
    other2[0] += 0.003;

    // tau1 gate: predicted gain identically zero, threshold above it.
    {
        ScoreMatrix sm = columns_matrix("gate", {"knn_p", "lof_a", "lof_b"},
                                        {prim, other, other2});
        TwoPartGainModel m = rigged_model(0.0);
        m.primary_perf = {{"knn_p", 0.9}, {"lof_a", 0.1}, {"lof_b", 0.1}};
        ModelConfig cfg;
        cfg.tau1 = 0.001;
        cfg.eta = 4;
        SelectionResult res = select(sm, ModelPool{}, m, cfg, PrimarySpec{});
        if (res.stop_reason != "tau1_gate")
            return "tau1 fixture stopped with '" + res.stop_reason + "'";
        if (res.selected.size() != 1) return "tau1 fixture selected more than the primary";
        bool visible = false;
        for (const auto& r : res.trace)
            if (r.note == "tau1_gate" && !r.accepted) visible = true;
        if (!visible) return "tau1 gate not visible in the trace";
    }

    // Nonpositive utility: family risk makes every stage-2 delta-U negative.
    {
        ScoreMatrix sm = columns_matrix("veto", {"knn_p", "lof_a", "lof_b"},
                                        {prim, other, other2});
        TwoPartGainModel m = rigged_model(0.05);
        m.primary_perf = {{"knn_p", 0.9}};
        m.family_risk = {{"lof", 0.5}};
        ModelConfig cfg;
        cfg.tau1 = 0.01;
        cfg.tau2 = 0.01;
        cfg.beta = 0.0;
        cfg.lambda_fam = 0.2;
        cfg.eta = 4;
        SelectionResult res = select(sm, ModelPool{}, m, cfg, PrimarySpec{});
        if (res.stop_reason != "no_positive_utility")
            return "utility fixture stopped with '" + res.stop_reason + "'";
        bool visible = false;
        for (const auto& r : res.trace)
            if (r.step >= 3 && r.note.empty() && r.delta_u <= 0.0 && !r.accepted) visible = true;
        if (!visible) return "nonpositive delta-U not visible in the trace";
    }
    return "";
}

// --------------------------------------------------------------------------
// criterion 7: family risk from a deterministic adversarial corpus

std::string c7() {
    // Ranking by the primary misorders one pair; the lof column repairs it in
    // the mean (positive gain), while both hbos columns are anti-correlated
    // with the labels and can only hurt.
    std::vector<uint8_t> labels{1, 1, 0, 0, 0};
    std::vector<std::vector<double>> cols{
        {0.9, 0.5, 0.7, 0.1, 0.2},      // knn_p, the primary
        {0.4, 0.9, 0.5, 0.0, 0.45},     // lof_good
        {0.05, 0.0, 1.0, 0.95, 0.9},    // hbos_bad1, reversed ranking
        {0.0, 0.05, 0.9, 1.0, 0.95},    // hbos_bad2, reversed ranking
    };
    ScoreMatrix sm = columns_matrix("adversarial",
                                    {"knn_p", "lof_good", "hbos_bad1", "hbos_bad2"}, cols);
    RolloutConfig cfg;
    cfg.eta = 4;
    HarvestResult h = harvest({{sm, labels}}, tiny_pool(), cfg);

    if (!(h.risk.lookup("hbos") > 0.0))
        return "anti-correlated family got pi = " + fmt_g(h.risk.lookup("hbos"));
    if (h.risk.lookup("lof") != 0.0)
        return "non-negative family got pi = " + fmt_g(h.risk.lookup("lof"));
    if (h.risk.counts.at("hbos") == 0) return "no hbos gain samples harvested";
    return "";
}

// --------------------------------------------------------------------------
// criterion 8: synthetic end-to-end benchmark through the CLI

std::string c8() {
    fs::path meta = g_work / "meta", test = g_work / "test", cache = g_work / "cache";
    fs::path pool = g_work / "pool.toml";
    {
        std::ofstream f(pool);
        f << "[pool]\nbase_seed = 42\n\n"
          << "[knn]\nk = [5, 15]\nmethod = [\"largest\", \"mean\"]\n\n"
          << "[lof]\nk = [10, 25]\nmetric = [\"euclidean\"]\n\n"
          << "[hbos]\nbins = [10, 20]\ntol = [0.5]\n\n"
          << "[iforest]\ntrees = [100]\nmax_features = [0.6, 0.9]\npsi = [256]\n\n"
          << "[loda]\nprojections = [25, 50]\nbins = [20]\n\n"
          << "[abod]\nk = [10, 25]\n\n"
          << "[cof]\nk = [10, 25]\n";
    }
    // Four shapes, local-anomaly heavy so detector quality genuinely spreads;
    // 5 meta datasets per shape, held-out seeds from the same generator mix.
    const std::string shapes[] = {
        "--n 150 --global-anoms 3 --local-anoms 9 --d 8 --clusters 4",
        "--n 120 --global-anoms 2 --local-anoms 8 --d 6 --clusters 3",
        "--n 180 --global-anoms 4 --local-anoms 10 --d 10 --clusters 5",
        "--n 140 --global-anoms 3 --local-anoms 7 --d 7 --clusters 4",
    };
    for (int s = 0; s < 4; ++s)
        run_cli("gen-synth " + shapes[s] + " --seed " + std::to_string(1 + 10 * s) +
                    " --count 5 --out " + meta.string(),
                "gen_meta" + std::to_string(s));
    run_cli("gen-synth " + shapes[0] + " --seed 101 --count 2 --out " + test.string(),
            "gen_test0");
    for (int s = 1; s < 4; ++s)
        run_cli("gen-synth " + shapes[s] + " --seed " + std::to_string(101 + 10 * s) +
                    " --count 1 --out " + test.string(),
                "gen_test" + std::to_string(s));

    fs::path bench = g_work / "bench.csv";
    run_cli("benchmark --meta " + meta.string() + " --test " + test.string() +
                " --methods metaens,random-ens:3,singleton --seeds 1,2,3,4,5 --pool " +
                pool.string() + " --cache-dir " + cache.string() + " --out " + bench.string(),
            "benchmark");

    // mean AP per (method, seed) over the five held-out datasets
    std::map<std::string, std::map<uint64_t, std::pair<double, size_t>>> cells;
    std::ifstream f(bench);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("dataset_id,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string ds, method, seed_s, ap_s, auc_s;
        std::getline(ss, ds, ',');
        std::getline(ss, method, ',');
        std::getline(ss, seed_s, ',');
        std::getline(ss, ap_s, ',');
        std::getline(ss, auc_s, ',');
        auto& cell = cells[method][std::stoull(seed_s)];
        cell.first += std::stod(ap_s);
        cell.second += 1;
    }
    if (cells.size() != 3) return "expected 3 methods in " + bench.string();

    int wins_re3 = 0, wins_single = 0;
    std::string detail;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        auto mean = [&](const std::string& m) {
            auto& cell = cells.at(m).at(seed);
            return cell.first / static_cast<double>(cell.second);
        };
        double me = mean("metaens"), re3 = mean("random-ens:3"), sg = mean("singleton");
        wins_re3 += me >= re3 ? 1 : 0;
        wins_single += me >= sg ? 1 : 0;
        detail += (detail.empty() ? "" : "; ") + std::to_string(seed) + ": " + fmt_g(me) +
                  "/" + fmt_g(re3) + "/" + fmt_g(sg);
    }
    if (wins_re3 < 4 || wins_single < 4)
        return "metaens/random-ens:3/singleton mean AP per seed -> " + detail;
    return "";
}

// --------------------------------------------------------------------------
// criterion 9: byte-identical reruns, save/load round-trip

std::string c9() {
    fs::path meta = g_work / "meta", test = g_work / "test", cache = g_work / "cache";
    fs::path pool = g_work / "pool.toml";
    std::string common = " --meta " + meta.string() + " --pool " + pool.string() +
                         " --cache-dir " + cache.string();
    fs::path m1 = g_work / "m1.json", m2 = g_work / "m2.json";
    run_cli("meta-train" + common + " --out " + m1.string(), "train1");
    run_cli("meta-train" + common + " --out " + m2.string(), "train2");
    if (slurp(m1) != slurp(m2)) return "model files differ between identical runs";

    std::vector<fs::path> test_csvs;
    for (const auto& e : fs::directory_iterator(test))
        if (e.path().extension() == ".csv") test_csvs.push_back(e.path());
    std::sort(test_csvs.begin(), test_csvs.end());
    if (test_csvs.empty()) return "no held-out datasets on disk";
    std::string data = test_csvs.front().string();
    std::string id = test_csvs.front().stem().string();

    for (const char* dir : {"sel1", "sel2"})
        run_cli("select --model " + m1.string() + " --data " + data + " --pool " +
                    pool.string() + " --cache-dir " + cache.string() + " --out-dir " +
                    (g_work / dir).string(),
                dir);
    for (const char* suffix : {".selection.json", ".ensemble.csv"})
        if (slurp(g_work / "sel1" / (id + suffix)) != slurp(g_work / "sel2" / (id + suffix)))
            return std::string(suffix) + " differs between identical runs";

    TwoPartGainModel a = load_model(m1.string());
    fs::path rt = g_work / "roundtrip.json";
    save_model(a, rt.string());
    TwoPartGainModel b = load_model(rt.string());
    Rng rng(1009);
    for (int i = 0; i < 1000; ++i) {
        StateVector phi;
        for (auto& v : phi) v = rng.uniform(-3.0, 3.0);
        if (a.predict_gain(phi) != b.predict_gain(phi))
            return "round-tripped model predicts differently (case " + std::to_string(i) + ")";
    }
    return "";
}

// --------------------------------------------------------------------------
// criterion 10: ablation plumbing

std::string c10() {
    fs::path cache = g_work / "cache", pool = g_work / "pool.toml";
    fs::path meta_s = g_work / "meta_small", test_s = g_work / "test_small";
    // Shapes and seeds reuse criterion 8's corpus so the cache is warm; this
    // seed block is one whose rollouts yield both positive and negative gains.
    run_cli("gen-synth --n 120 --global-anoms 2 --local-anoms 8 --d 6 --clusters 3"
            " --seed 11 --count 4 --out " +
                meta_s.string(),
            "gen_ms");
    run_cli("gen-synth --n 150 --global-anoms 3 --local-anoms 9 --d 8 --clusters 4"
            " --seed 101 --count 2 --out " +
                test_s.string(),
            "gen_ts");

    fs::path sweep = g_work / "beta.csv";
    run_cli("ablate --axis beta --meta " + meta_s.string() + " --test " + test_s.string() +
                " --pool " + pool.string() + " --cache-dir " + cache.string() + " --out " +
                sweep.string(),
            "ablate");
    std::vector<double> values;
    std::ifstream f(sweep);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("axis,", 0) == 0) continue;
        size_t a = line.find(','), b = line.find(',', a + 1);
        values.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    }
    std::vector<double> want{0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0};
    if (values != want) {
        std::string got;
        for (double v : values) got += (got.empty() ? "" : ",") + fmt_g(v);
        return "beta sweep rows [" + got + "], want the 7-point grid";
    }

    fs::path coarse = g_work / "coarse.json";
    run_cli("meta-train --meta " + meta_s.string() + " --pool " + pool.string() +
                " --family-mode coarse --cache-dir " + cache.string() + " --out " +
                coarse.string(),
            "train_coarse");
    TwoPartGainModel m = load_model(coarse.string());
    if (m.family_risk.size() != 3)
        return "coarse mode produced " + std::to_string(m.family_risk.size()) +
               " risk entries, want 3";
    for (const char* key : {"density_proximity", "isolation_tree", "linear_probabilistic"})
        if (!m.family_risk.count(key)) return std::string("missing coarse risk key ") + key;
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: metaens_acceptance <path-to-metaens-cli>\n";
        return 2;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / "metaens_acceptance";
    std::error_code ec;
    fs::remove_all(g_work, ec);
    fs::create_directories(g_work);

    struct Criterion {
        int id;
        double budget_s;  // 0 = untimed
        std::function<std::string()> body;
    };
    const Criterion criteria[] = {
        {1, 10.0, c1},  {2, 10.0, c2}, {3, 30.0, c3}, {4, 0.0, c4},  {5, 0.0, c5},
        {6, 0.0, c6},   {7, 0.0, c7},  {8, 300.0, c8}, {9, 0.0, c9}, {10, 0.0, c10},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        try {
            detail = c.body();
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (detail.empty() && c.budget_s > 0.0 && secs > c.budget_s)
            detail = "over time budget (" + fmt_g(secs) + "s > " + fmt_g(c.budget_s) + "s)";
        std::ostringstream line;
        line.precision(1);
        line << std::fixed << "criterion " << c.id << ": "
             << (detail.empty() ? "pass" : "FAIL") << " (" << secs << "s"
             << (detail.empty() ? "" : ", " + detail) << ")";
        std::cout << line.str() << std::endl;
        if (!detail.empty()) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
