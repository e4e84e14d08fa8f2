// metaens CLI: synthesis, meta-training, selection, evaluation, benchmarks,
// ablations. Exit codes: 0 ok, 1 usage, 2 bad data, 3 broken invariant.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "metaens/csv.hpp"
#include "metaens/dataset.hpp"
#include "metaens/errors.hpp"
#include "metaens/meta_model.hpp"
#include "metaens/meta_train.hpp"
#include "metaens/metrics.hpp"
#include "metaens/pool_config.hpp"
#include "metaens/prng.hpp"
#include "metaens/score_cache.hpp"
#include "metaens/selector.hpp"
#include "metaens/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace metaens;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

using Echo = std::vector<std::pair<std::string, std::string>>;

void write_echo_comments(std::ostream& os, const Echo& echo) {
    os << "# " << kToolVersion << "\n";
    for (const auto& [k, v] : echo) os << "# " << k << "=" << v << "\n";
}

json echo_to_json(const Echo& echo) {
    json j;
    for (const auto& [k, v] : echo) j[k] = v;
    return j;
}

std::string fmt(double v) { return format_double(v); }

std::vector<std::string> list_csv_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv")
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw DataError("no .csv datasets in " + dir);
    return out;
}

bool header_has_column(const std::string& path, const std::string& col) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (cell == col) return true;
    return false;
}

Dataset load_maybe_labeled(const std::string& path, const std::string& label_col) {
    if (header_has_column(path, label_col)) return load_dataset(path, label_col);
    return load_dataset(path, std::nullopt);
}

struct PoolFlags {
    std::string pool_path;
    std::string family_mode = "fine";
};

FamilyMode parse_mode(const std::string& s) {
    if (s == "fine") return FamilyMode::FINE;
    if (s == "coarse") return FamilyMode::COARSE;
    throw DataError("family mode must be 'fine' or 'coarse', got '" + s + "'");
}

ModelPool make_pool(const PoolFlags& pf) {
    PoolGridConfig grid = pf.pool_path.empty() ? default_grid() : parse_pool_config(pf.pool_path);
    return build_pool(grid, parse_mode(pf.family_mode));
}

PrimarySpec parse_primary(const std::string& s) {
    PrimarySpec p;
    if (s == "global-best") {
        p.strategy = PrimaryStrategy::GLOBAL_BEST;
    } else if (s.rfind("fixed:", 0) == 0) {
        p.strategy = PrimaryStrategy::FIXED;
        p.fixed_id = s.substr(6);
        if (p.fixed_id.empty()) throw DataError("--primary fixed: needs a model id");
    } else if (s.rfind("random:", 0) == 0) {
        p.strategy = PrimaryStrategy::RANDOM;
        try {
            p.seed = std::stoull(s.substr(7));
        } catch (...) {
            throw DataError("--primary random: needs an integer seed");
        }
    } else {
        throw DataError("--primary must be global-best, fixed:<id>, or random:<seed>");
    }
    return p;
}

std::vector<MetaDataset> load_corpus(const std::string& dir, const std::string& label_col,
                                     const ModelPool& pool, const std::string& cache_dir,
                                     double fraction = 1.0) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw DataError("meta fraction must lie in (0, 1]");
    std::vector<std::string> files = list_csv_files(dir);
    if (fraction < 1.0) {
        auto keep = static_cast<size_t>(std::llround(fraction * static_cast<double>(files.size())));
        keep = std::max<size_t>(1, std::min(keep, files.size()));
        files.resize(keep);
    }
    std::vector<MetaDataset> out;
    for (const auto& f : files) {
        Dataset d = load_dataset(f, label_col);
        if (!d.labeled()) throw DataError(f + ": labels required");
        Dataset prep = preprocess(d);
        out.push_back({cached_scores(prep, pool, cache_dir), *d.labels});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flag bundles shared by meta-train / benchmark / ablate

struct TrainFlags {
    size_t eta = 5;
    size_t T = 0;
    double epsilon = 0.0;
    uint64_t seed = 42;
    size_t trees_cls = 500;
    size_t trees_reg = 800;
    double risk_percentile = 0.10;
    size_t k_top = 0;

    MetaTrainConfig to_cfg() const {
        MetaTrainConfig c;
        c.rollout = {eta, T, epsilon, seed};
        c.n_trees_cls = trees_cls;
        c.n_trees_reg = trees_reg;
        c.model_seed = seed;
        c.k_top = k_top;
        c.risk_percentile = risk_percentile;
        return c;
    }
};

struct SelectFlags {
    double tau1 = 0.001;
    double tau2 = 0.005;
    double beta = 3.0;
    double lambda_fam = 0.2;
    size_t eta = 5;
    size_t k_top = 0;
    std::string combiner = "mean";
    std::string primary = "global-best";

    ModelConfig to_snapshot(const TrainFlags& t) const {
        ModelConfig c;
        c.tau1 = tau1;
        c.tau2 = tau2;
        c.beta = beta;
        c.lambda_fam = lambda_fam;
        c.k_top = k_top;
        c.eta = eta;
        c.combiner = combiner_from_name(combiner);
        c.risk_percentile = t.risk_percentile;
        return c;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& t) {
    cmd->add_option("--eta", t.eta, "ensemble budget")->capture_default_str();
    cmd->add_option("--rollout-length", t.T, "rollout length T (0 = eta)")->capture_default_str();
    cmd->add_option("--epsilon", t.epsilon, "rollout exploration probability")
        ->capture_default_str();
    cmd->add_option("--seed", t.seed, "master seed for rollouts and forests")
        ->capture_default_str();
    cmd->add_option("--trees-cls", t.trees_cls, "classifier forest size")->capture_default_str();
    cmd->add_option("--trees-reg", t.trees_reg, "regressor forest size")->capture_default_str();
    cmd->add_option("--risk-percentile", t.risk_percentile, "family-risk gain percentile")
        ->capture_default_str();
    cmd->add_option("--k-top", t.k_top, "top-k overlap size (0 = derive from N)")
        ->capture_default_str();
}

void add_select_flags(CLI::App* cmd, SelectFlags& s) {
    cmd->add_option("--tau1", s.tau1, "first-partner gate threshold")->capture_default_str();
    cmd->add_option("--tau2", s.tau2, "expansion gain threshold")->capture_default_str();
    cmd->add_option("--beta", s.beta, "redundancy discount strength")->capture_default_str();
    cmd->add_option("--lambda", s.lambda_fam, "family-risk penalty weight")
        ->capture_default_str();
    cmd->add_option("--combiner", s.combiner, "score aggregation")
        ->check(CLI::IsMember({"mean", "median", "max", "min"}))
        ->capture_default_str();
    cmd->add_option("--primary", s.primary,
                    "stage-0 strategy: global-best | fixed:<id> | random:<seed>")
        ->capture_default_str();
}

void echo_train_select(Echo& e, const TrainFlags& t, const SelectFlags& s,
                       const PoolFlags& pf) {
    e.emplace_back("family_mode", pf.family_mode);
    e.emplace_back("pool", pf.pool_path.empty() ? "<builtin>" : pf.pool_path);
    e.emplace_back("eta", std::to_string(t.eta));
    e.emplace_back("rollout_length", std::to_string(t.T));
    e.emplace_back("epsilon", fmt(t.epsilon));
    e.emplace_back("seed", std::to_string(t.seed));
    e.emplace_back("trees_cls", std::to_string(t.trees_cls));
    e.emplace_back("trees_reg", std::to_string(t.trees_reg));
    e.emplace_back("risk_percentile", fmt(t.risk_percentile));
    e.emplace_back("k_top", std::to_string(t.k_top));
    e.emplace_back("tau1", fmt(s.tau1));
    e.emplace_back("tau2", fmt(s.tau2));
    e.emplace_back("beta", fmt(s.beta));
    e.emplace_back("lambda", fmt(s.lambda_fam));
    e.emplace_back("combiner", s.combiner);
    e.emplace_back("primary", s.primary);
}

// ---------------------------------------------------------------------------
// gen-synth

struct GenSynthOpts {
    size_t n = 200;
    size_t anoms = 10;
    long long global_anoms = -1;
    long long local_anoms = -1;
    size_t dim = 4;
    size_t clusters = 3;
    uint64_t seed = 0;
    size_t count = 1;
    std::string out_dir;
};

int run_gen_synth(const GenSynthOpts& o) {
    fs::create_directories(o.out_dir);
    for (size_t i = 0; i < o.count; ++i) {
        SynthSpec s;
        s.n_inliers = o.n;
        s.n_anomaly_global =
            o.global_anoms >= 0 ? static_cast<size_t>(o.global_anoms) : (o.anoms + 1) / 2;
        s.n_anomaly_local =
            o.local_anoms >= 0 ? static_cast<size_t>(o.local_anoms) : o.anoms / 2;
        s.dim = o.dim;
        s.n_clusters = o.clusters;
        s.seed = o.seed + i;
        std::string name = synth_file_name(s);
        std::string id = name.substr(0, name.size() - 4);  // drop ".csv"
        Dataset d = generate_synthetic(s, id);
        std::string path = (fs::path(o.out_dir) / name).string();
        write_dataset_csv(d, path);
        std::cout << path << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// meta-train

struct MetaTrainOpts {
    std::string meta_dir;
    std::string out_path;
    std::string label_col = "label";
    std::string cache_dir;
    std::string gains_csv;
    double meta_fraction = 1.0;
    bool tune = false;
    PoolFlags pool;
    TrainFlags train;
    SelectFlags sel;
};

int run_meta_train(const MetaTrainOpts& o) {
    ModelPool pool = make_pool(o.pool);
    std::string cache = resolve_cache_dir(o.cache_dir);
    std::vector<MetaDataset> meta =
        load_corpus(o.meta_dir, o.label_col, pool, cache, o.meta_fraction);
    std::cout << "meta datasets: " << meta.size() << ", pool size: " << pool.specs.size()
              << "\n";

    MetaTrainConfig cfg = o.train.to_cfg();
    ModelConfig snapshot = o.sel.to_snapshot(o.train);
    if (o.tune) {
        TuneResult tr = lodo_tune(meta, pool, default_tune_grids(), cfg, snapshot);
        snapshot.tau1 = tr.tau1;
        snapshot.tau2 = tr.tau2;
        snapshot.beta = tr.beta;
        snapshot.lambda_fam = tr.lambda_fam;
        std::cout << "tuned: tau1=" << fmt(tr.tau1) << " tau2=" << fmt(tr.tau2)
                  << " beta=" << fmt(tr.beta) << " lambda=" << fmt(tr.lambda_fam)
                  << " (lodo mean AP " << fmt(tr.mean_ap) << ")\n";
    }

    HarvestResult h;
    TwoPartGainModel model = meta_train(meta, pool, cfg, snapshot, &h);
    save_model(model, o.out_path);
    if (!o.gains_csv.empty()) dump_gains_csv(h.samples, o.gains_csv);

    std::cout << "gain samples: " << h.cls_x.size() << " (" << h.reg_x.size()
              << " positive)\n";
    for (const auto& [fam, pi] : model.family_risk)
        std::cout << "  pi[" << fam << "] = " << fmt(pi) << " (" << model.family_counts.at(fam)
                  << " samples)\n";
    std::cout << "model written: " << o.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// select

struct SelectOpts {
    std::string model_path;
    std::string data_path;
    std::string label_col = "label";
    std::string out_dir = ".";
    std::string cache_dir;
    std::string dump_similarity;
    PoolFlags pool;
    SelectFlags sel;
    size_t eta = 0;     // 0 = model default
    size_t k_top = 0;   // 0 = model default
    CLI::App* cmd = nullptr;  // for explicit-flag detection
};

int run_select(const SelectOpts& o) {
    TwoPartGainModel model = load_model(o.model_path);
    PoolFlags pf = o.pool;
    pf.family_mode = model.config.family_mode == FamilyMode::COARSE ? "coarse" : "fine";
    ModelPool pool = make_pool(pf);
    Dataset d = load_maybe_labeled(o.data_path, o.label_col);
    Dataset prep = preprocess(d);
    ScoreMatrix sm = cached_scores(prep, pool, resolve_cache_dir(o.cache_dir));

    // Model config is the default; explicitly passed flags override it.
    ModelConfig cfg = model.config;
    auto passed = [&](const std::string& flag) { return o.cmd->count(flag) > 0; };
    if (passed("--tau1")) cfg.tau1 = o.sel.tau1;
    if (passed("--tau2")) cfg.tau2 = o.sel.tau2;
    if (passed("--beta")) cfg.beta = o.sel.beta;
    if (passed("--lambda")) cfg.lambda_fam = o.sel.lambda_fam;
    if (passed("--combiner")) cfg.combiner = combiner_from_name(o.sel.combiner);
    if (o.eta) cfg.eta = o.eta;
    if (o.k_top) cfg.k_top = o.k_top;

    SelectionResult res = select(sm, pool, model, cfg, parse_primary(o.sel.primary));

    fs::create_directories(o.out_dir);
    std::string scores_path = (fs::path(o.out_dir) / (sm.dataset_id + ".ensemble.csv")).string();
    std::string json_path = (fs::path(o.out_dir) / (sm.dataset_id + ".selection.json")).string();
    write_scores_csv(res.ensemble_scores, scores_path);
    // The JSON names its sibling CSV by basename so identical runs into
    // different directories stay byte-identical.
    write_selection_json(res, cfg, sm.dataset_id + ".ensemble.csv", json_path);
    if (!o.dump_similarity.empty()) dump_similarity_csv(sm, res.k_top_used, o.dump_similarity);

    std::cout << "selected (" << res.selected.size() << ", stop: " << res.stop_reason << "):";
    for (const auto& id : res.selected) std::cout << " " << id;
    std::cout << "\n" << json_path << "\n" << scores_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
    std::string scores_path;
    std::string data_path;
    std::string label_col = "label";
    std::string auc_ties = "half";
    std::string out_path;
};

std::vector<double> read_score_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::vector<double> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        char* end = nullptr;
        double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || *end != '\0') {
            if (lineno == 1) continue;  // header
            throw DataError(path + ":" + std::to_string(lineno) + ": not a number: " + line);
        }
        out.push_back(v);
    }
    if (out.empty()) throw DataError(path + ": no scores");
    return out;
}

int run_evaluate(const EvaluateOpts& o) {
    Dataset d = load_dataset(o.data_path, o.label_col);
    if (!d.labeled())
        throw DataError(o.data_path + ": label column '" + o.label_col + "' required");
    std::vector<double> scores = read_score_lines(o.scores_path);
    if (scores.size() != d.n())
        throw DataError("scores/rows mismatch: " + std::to_string(scores.size()) + " vs " +
                        std::to_string(d.n()));
    AucTies ties = o.auc_ties == "strict" ? AucTies::STRICT : AucTies::HALF_CREDIT;
    EvalReport r = evaluate_scores(scores, *d.labels, ties);

    json doc;
    doc["tool_version"] = kToolVersion;
    doc["config"] = echo_to_json({{"scores", o.scores_path},
                                  {"data", o.data_path},
                                  {"label_col", o.label_col},
                                  {"auc_ties", o.auc_ties}});
    doc["n"] = r.n;
    doc["n_anomalies"] = r.n_anomalies;
    doc["ap"] = r.ap;
    doc["roc_auc"] = r.roc_auc;
    doc["precision_at_pi"] = r.precision_at_pi;
    doc["max_f1"] = r.max_f1;
    if (o.out_path.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        std::ofstream f(o.out_path);
        if (!f) throw DataError("cannot write " + o.out_path);
        f << doc.dump(2) << "\n";
        std::cout << o.out_path << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct Method {
    std::string token;  // as given, used in outputs
    enum Kind { METAENS, RANDOM_ENS, SINGLETON, GLOBAL_BEST, MEGA, GREEDY_ORACLE } kind;
    size_t k = 0;  // RANDOM_ENS size
};

Method parse_method(const std::string& token) {
    Method m;
    m.token = token;
    if (token == "metaens") m.kind = Method::METAENS;
    else if (token == "singleton") m.kind = Method::SINGLETON;
    else if (token == "global-best") m.kind = Method::GLOBAL_BEST;
    else if (token == "mega") m.kind = Method::MEGA;
    else if (token == "greedy-oracle") m.kind = Method::GREEDY_ORACLE;
    else if (token.rfind("random-ens:", 0) == 0) {
        m.kind = Method::RANDOM_ENS;
        try {
            m.k = std::stoul(token.substr(11));
        } catch (...) {
            throw DataError("bad ensemble size in method token '" + token + "'");
        }
        if (m.k == 0) throw DataError("random-ens needs k >= 1");
    } else {
        throw DataError("unknown method '" + token +
                        "'; valid: metaens, random-ens:<k>, singleton, global-best, mega, "
                        "greedy-oracle");
    }
    return m;
}

struct BenchmarkOpts {
    std::string meta_dir;
    std::string test_dir;
    std::string out_path;
    std::string summary_path;
    std::string label_col = "label";
    std::string cache_dir;
    std::vector<std::string> methods{"metaens", "random-ens:3", "singleton"};
    std::vector<uint64_t> seeds{1};
    std::vector<size_t> pool_subsample;
    PoolFlags pool;
    TrainFlags train;
    SelectFlags sel;
};

// Uniformly draw m members from the pool; members stay sorted by id.
ModelPool subsample_pool(const ModelPool& pool, size_t m, uint64_t seed) {
    if (m == 0 || m > pool.specs.size())
        throw DataError("pool subsample size " + std::to_string(m) + " out of range [1, " +
                        std::to_string(pool.specs.size()) + "]");
    std::vector<size_t> idx(pool.specs.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (size_t i = 0; i < m; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    ModelPool sub;
    sub.mode = pool.mode;
    for (size_t i : idx) sub.specs.push_back(pool.specs[i]);
    return sub;
}

// Column projection: scores for a sub-pool are exactly the sub-pool's columns
// of the full matrix (fits and per-column normalization are independent).
ScoreMatrix project_scores(const ScoreMatrix& sm, const ModelPool& sub) {
    ScoreMatrix out;
    out.dataset_id = sm.dataset_id;
    out.model_ids = sub.ids();
    out.scores = Matrix(sm.scores.rows, out.model_ids.size());
    for (size_t c = 0; c < out.model_ids.size(); ++c) {
        std::vector<double> col = sm.column(out.model_ids[c]);
        for (size_t r = 0; r < col.size(); ++r) out.scores.at(r, c) = col[r];
    }
    return out;
}

std::vector<double> method_scores(const Method& m, const MetaDataset& test,
                                  const ModelPool& pool, const TwoPartGainModel& model,
                                  const ModelConfig& cfg, const PrimarySpec& primary,
                                  const TrainFlags& train, uint64_t seed) {
    std::vector<std::string> ids = test.sm.model_ids;
    std::sort(ids.begin(), ids.end());
    auto pick_random = [&](size_t k) {
        if (k > ids.size())
            throw DataError("method " + m.token + ": k exceeds pool size " +
                            std::to_string(ids.size()));
        Rng rng(derive_seed(seed, fnv1a64_str(test.sm.dataset_id + "|" + m.token)));
        std::vector<std::string> chosen = ids;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(rng.below(chosen.size() - i));
            std::swap(chosen[i], chosen[j]);
        }
        chosen.resize(k);
        return chosen;
    };
    auto mean_of_ids = [&](const std::vector<std::string>& members) {
        std::vector<std::vector<double>> cols;
        for (const auto& id : members) cols.push_back(test.sm.column(id));
        return aggregate(cols, Combiner::MEAN);
    };

    switch (m.kind) {
        case Method::METAENS:
            return select(test.sm, pool, model, cfg, primary).ensemble_scores;
        case Method::RANDOM_ENS:
            return mean_of_ids(pick_random(m.k));
        case Method::SINGLETON:
            return mean_of_ids(pick_random(1));
        case Method::GLOBAL_BEST: {
            PrimarySpec gb;  // GLOBAL_BEST
            return test.sm.column(primary_select(test.sm, gb, model.primary_perf));
        }
        case Method::MEGA:
            return mean_of_ids(ids);
        case Method::GREEDY_ORACLE: {
            RolloutConfig rc{train.eta, train.T, 0.0, seed};
            RolloutResult rr = rollout(test.sm, test.labels, pool, rc, train.k_top);
            return mean_of_ids(rr.trajectory);
        }
    }
    throw InternalError("unhandled method kind");
}

struct BenchRow {
    std::string dataset;
    std::string method;
    uint64_t seed;
    double ap;
    double auc;
};

void print_summary(std::ostream& os, const std::vector<Method>& methods,
                   const std::vector<BenchRow>& rows,
                   const std::vector<std::string>& dataset_ids) {
    os << "== mean AP over (dataset, seed) cells ==\n";
    for (const auto& m : methods) {
        std::vector<double> aps;
        for (const auto& r : rows)
            if (r.method == m.token) aps.push_back(r.ap);
        double mean = 0.0;
        for (double a : aps) mean += a;
        mean /= static_cast<double>(aps.size());
        double var = 0.0;
        for (double a : aps) var += (a - mean) * (a - mean);
        double sd = aps.size() > 1 ? std::sqrt(var / static_cast<double>(aps.size() - 1)) : 0.0;
        os << "  " << m.token << ": " << fmt(mean) << " +/- " << fmt(sd) << " (n=" << aps.size()
           << ")\n";
    }

    // Per-dataset AP, seeds averaged, for ranks and the paired tests.
    auto per_dataset = [&](const std::string& token) {
        std::vector<double> out;
        for (const auto& d : dataset_ids) {
            double sum = 0.0;
            size_t n = 0;
            for (const auto& r : rows)
                if (r.method == token && r.dataset == d) {
                    sum += r.ap;
                    ++n;
                }
            out.push_back(sum / static_cast<double>(n));
        }
        return out;
    };

    std::vector<std::vector<double>> ap_table;
    for (const auto& m : methods) ap_table.push_back(per_dataset(m.token));
    std::vector<double> ranks = average_ranks(ap_table);
    os << "== average rank (1 = best, per-dataset AP, seeds averaged) ==\n";
    for (size_t i = 0; i < methods.size(); ++i)
        os << "  " << methods[i].token << ": " << fmt(ranks[i]) << "\n";

    auto metaens_it = std::find_if(methods.begin(), methods.end(),
                                   [](const Method& m) { return m.kind == Method::METAENS; });
    if (metaens_it == methods.end()) {
        os << "== wilcoxon: skipped (no metaens among methods) ==\n";
        return;
    }
    size_t base_idx = static_cast<size_t>(metaens_it - methods.begin());
    std::vector<double> base = ap_table[base_idx];
    os << "== one-sided wilcoxon p (metaens AP > baseline AP, per dataset) ==\n";
    for (size_t i = 0; i < methods.size(); ++i) {
        if (i == base_idx) continue;
        std::vector<double> diffs(base.size());
        bool all_zero = true;
        for (size_t d = 0; d < base.size(); ++d) {
            diffs[d] = base[d] - ap_table[i][d];
            if (diffs[d] != 0.0) all_zero = false;
        }
        if (all_zero) {
            os << "  vs " << methods[i].token << ": degenerate (all differences zero)\n";
        } else {
            os << "  vs " << methods[i].token << ": p = " << fmt(wilcoxon_signed_rank(diffs))
               << "\n";
        }
    }
}

int run_benchmark(const BenchmarkOpts& o) {
    std::vector<Method> methods;
    for (const auto& t : o.methods) methods.push_back(parse_method(t));
    if (methods.empty()) throw DataError("benchmark: no methods");
    if (o.seeds.empty()) throw DataError("benchmark: no seeds");

    ModelPool pool = make_pool(o.pool);
    std::string cache = resolve_cache_dir(o.cache_dir);
    std::vector<MetaDataset> meta = load_corpus(o.meta_dir, o.label_col, pool, cache);
    std::vector<MetaDataset> tests = load_corpus(o.test_dir, o.label_col, pool, cache);

    Echo echo;
    echo_train_select(echo, o.train, o.sel, o.pool);
    {
        std::string ms;
        for (const auto& m : methods) ms += (ms.empty() ? "" : ",") + m.token;
        std::string ss;
        for (uint64_t s : o.seeds) ss += (ss.empty() ? "" : ",") + std::to_string(s);
        echo.emplace_back("methods", ms);
        echo.emplace_back("seeds", ss);
        echo.emplace_back("pool_hash", std::to_string(pool.pool_hash()));
    }

    std::ofstream out(o.out_path);
    if (!out) throw DataError("cannot write " + o.out_path);
    write_echo_comments(out, echo);

    MetaTrainConfig cfg = o.train.to_cfg();
    ModelConfig snapshot = o.sel.to_snapshot(o.train);
    PrimarySpec primary = parse_primary(o.sel.primary);

    if (!o.pool_subsample.empty()) {
        // Pool-size robustness sweep: per (size, seed), a random sub-pool is
        // drawn, the model is retrained on projected score columns, and each
        // method's AP is averaged over the test datasets.
        out << "pool_size,method,seed,mean_ap\n";
        struct SweepRow {
            size_t size;
            std::string method;
            uint64_t seed;
            double mean_ap;
        };
        std::vector<SweepRow> sweep;
        for (size_t size : o.pool_subsample)
            for (uint64_t seed : o.seeds) {
                ModelPool sub = subsample_pool(
                    pool, size, derive_seed(seed, fnv1a64_str("pool_subsample")));
                std::vector<MetaDataset> meta_sub, tests_sub;
                for (const auto& md : meta)
                    meta_sub.push_back({project_scores(md.sm, sub), md.labels});
                for (const auto& td : tests)
                    tests_sub.push_back({project_scores(td.sm, sub), td.labels});
                TwoPartGainModel model = meta_train(meta_sub, sub, cfg, snapshot);
                for (const auto& m : methods) {
                    double sum = 0.0;
                    for (const auto& td : tests_sub) {
                        std::vector<double> s = method_scores(m, td, sub, model, model.config,
                                                              primary, o.train, seed);
                        sum += average_precision(s, td.labels);
                    }
                    sweep.push_back(
                        {size, m.token, seed, sum / static_cast<double>(tests_sub.size())});
                }
            }
        std::sort(sweep.begin(), sweep.end(), [](const SweepRow& a, const SweepRow& b) {
            if (a.size != b.size) return a.size < b.size;
            if (a.method != b.method) return a.method < b.method;
            return a.seed < b.seed;
        });
        for (const auto& r : sweep)
            out << r.size << "," << r.method << "," << r.seed << "," << fmt(r.mean_ap) << "\n";
        std::cout << "sweep rows: " << sweep.size() << " -> " << o.out_path << "\n";
        return 0;
    }

    TwoPartGainModel model = meta_train(meta, pool, cfg, snapshot);

    std::vector<BenchRow> rows;
    for (const auto& td : tests)
        for (const auto& m : methods)
            for (uint64_t seed : o.seeds) {
                std::vector<double> s =
                    method_scores(m, td, pool, model, model.config, primary, o.train, seed);
                rows.push_back({td.sm.dataset_id, m.token, seed,
                                average_precision(s, td.labels), roc_auc(s, td.labels)});
            }
    std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.method != b.method) return a.method < b.method;
        return a.seed < b.seed;
    });

    out << "dataset_id,method,seed,ap,roc_auc\n";
    for (const auto& r : rows)
        out << r.dataset << "," << r.method << "," << r.seed << "," << fmt(r.ap) << ","
            << fmt(r.auc) << "\n";

    std::vector<std::string> ds_ids;
    for (const auto& td : tests) ds_ids.push_back(td.sm.dataset_id);
    std::sort(ds_ids.begin(), ds_ids.end());
    print_summary(std::cout, methods, rows, ds_ids);
    if (!o.summary_path.empty()) {
        std::ofstream sf(o.summary_path);
        if (!sf) throw DataError("cannot write " + o.summary_path);
        write_echo_comments(sf, echo);
        print_summary(sf, methods, rows, ds_ids);
    }
    std::cout << "rows: " << rows.size() << " -> " << o.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOpts {
    std::string axis;
    std::string meta_dir;
    std::string test_dir;
    std::string out_path;
    std::string label_col = "label";
    std::string cache_dir;
    PoolFlags pool;
    TrainFlags train;
    SelectFlags sel;
};

int run_ablate(const AblateOpts& o) {
    ModelPool pool = make_pool(o.pool);
    std::string cache = resolve_cache_dir(o.cache_dir);
    std::vector<MetaDataset> meta = load_corpus(o.meta_dir, o.label_col, pool, cache);
    std::vector<MetaDataset> tests = load_corpus(o.test_dir, o.label_col, pool, cache);

    MetaTrainConfig cfg = o.train.to_cfg();
    ModelConfig snapshot = o.sel.to_snapshot(o.train);
    PrimarySpec primary = parse_primary(o.sel.primary);

    auto eval_mean_ap = [&](const ModelPool& p, const TwoPartGainModel& model,
                            const ModelConfig& c, const std::vector<MetaDataset>& ts) {
        double sum = 0.0;
        for (const auto& td : ts) {
            SelectionResult r = select(td.sm, p, model, c, primary);
            sum += average_precision(r.ensemble_scores, td.labels);
        }
        return sum / static_cast<double>(ts.size());
    };

    std::vector<std::pair<std::string, double>> rows;
    if (o.axis == "combiner" || o.axis == "tau" || o.axis == "beta" || o.axis == "lambda") {
        // Selection-time axes share one trained model.
        TwoPartGainModel model = meta_train(meta, pool, cfg, snapshot);
        if (o.axis == "combiner") {
            for (const std::string& v : {"mean", "median", "max", "min"}) {
                ModelConfig c = model.config;
                c.combiner = combiner_from_name(v);
                rows.emplace_back(v, eval_mean_ap(pool, model, c, tests));
            }
        } else if (o.axis == "tau") {
            for (const auto& [t1, t2] : default_tune_grids().tau_pairs) {
                ModelConfig c = model.config;
                c.tau1 = t1;
                c.tau2 = t2;
                rows.emplace_back(fmt(t1) + "/" + fmt(t2), eval_mean_ap(pool, model, c, tests));
            }
        } else if (o.axis == "beta") {
            for (double b : default_tune_grids().betas) {
                ModelConfig c = model.config;
                c.beta = b;
                rows.emplace_back(fmt(b), eval_mean_ap(pool, model, c, tests));
            }
        } else {
            for (double l : default_tune_grids().lambdas) {
                ModelConfig c = model.config;
                c.lambda_fam = l;
                rows.emplace_back(fmt(l), eval_mean_ap(pool, model, c, tests));
            }
        }
    } else if (o.axis == "epsilon") {
        for (double eps : {0.0, 0.1, 0.2}) {
            MetaTrainConfig c = cfg;
            c.rollout.epsilon = eps;
            TwoPartGainModel model = meta_train(meta, pool, c, snapshot);
            rows.emplace_back(fmt(eps), eval_mean_ap(pool, model, model.config, tests));
        }
    } else if (o.axis == "family-mode") {
        for (const std::string& v : {"fine", "coarse"}) {
            PoolFlags pf = o.pool;
            pf.family_mode = v;
            ModelPool p = make_pool(pf);
            // Same grid, same ids: reuse the cached score columns as-is.
            std::vector<MetaDataset> meta_m, tests_m;
            for (const auto& md : meta) meta_m.push_back({project_scores(md.sm, p), md.labels});
            for (const auto& td : tests)
                tests_m.push_back({project_scores(td.sm, p), td.labels});
            TwoPartGainModel model = meta_train(meta_m, p, cfg, snapshot);
            rows.emplace_back(v, eval_mean_ap(p, model, model.config, tests_m));
        }
    } else {
        throw DataError("unknown axis '" + o.axis +
                        "'; valid: combiner, epsilon, tau, beta, lambda, family-mode");
    }

    Echo echo;
    echo_train_select(echo, o.train, o.sel, o.pool);
    echo.emplace_back("axis", o.axis);
    std::ofstream out(o.out_path);
    if (!out) throw DataError("cannot write " + o.out_path);
    write_echo_comments(out, echo);
    out << "axis,value,mean_ap\n";
    for (const auto& [v, ap] : rows) out << o.axis << "," << v << "," << fmt(ap) << "\n";
    std::cout << "ablation rows: " << rows.size() << " -> " << o.out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meta-learned ensemble selection for unsupervised outlier detection"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.set_config("--config", "", "read defaults from a config file ([subcommand] sections); "
                                   "explicit flags win");
    app.require_subcommand(1);

    GenSynthOpts gs;
    auto* gs_cmd = app.add_subcommand("gen-synth", "write synthetic labeled datasets");
    gs_cmd->add_option("--n", gs.n, "inliers per dataset")->capture_default_str();
    gs_cmd->add_option("--anoms", gs.anoms, "total anomalies (split global/local)")
        ->capture_default_str();
    gs_cmd->add_option("--global-anoms", gs.global_anoms, "override global anomaly count");
    gs_cmd->add_option("--local-anoms", gs.local_anoms, "override local anomaly count");
    gs_cmd->add_option("--d", gs.dim, "feature dimension")->capture_default_str();
    gs_cmd->add_option("--clusters", gs.clusters, "inlier cluster count")->capture_default_str();
    gs_cmd->add_option("--seed", gs.seed, "first seed")->capture_default_str();
    gs_cmd->add_option("--count", gs.count, "datasets to write (seeds seed..seed+count-1)")
        ->capture_default_str();
    gs_cmd->add_option("--out", gs.out_dir, "output directory")->required();

    MetaTrainOpts mt;
    auto* mt_cmd = app.add_subcommand("meta-train", "fit the gain model on labeled datasets");
    mt_cmd->add_option("--meta", mt.meta_dir, "directory of labeled CSVs")->required();
    mt_cmd->add_option("--out", mt.out_path, "model JSON path")->required();
    mt_cmd->add_option("--pool", mt.pool.pool_path, "pool grid file (default: builtin grid)");
    mt_cmd->add_option("--family-mode", mt.pool.family_mode, "fine | coarse")
        ->check(CLI::IsMember({"fine", "coarse"}))
        ->capture_default_str();
    mt_cmd->add_option("--label-col", mt.label_col, "label column name")->capture_default_str();
    mt_cmd->add_option("--meta-fraction", mt.meta_fraction,
                       "fraction of meta datasets to use (sorted order)")
        ->capture_default_str();
    mt_cmd->add_flag("--tune", mt.tune, "leave-one-dataset-out hyperparameter tuning");
    mt_cmd->add_option("--gains-csv", mt.gains_csv, "dump harvested gain samples");
    mt_cmd->add_option("--cache-dir", mt.cache_dir, "score cache root (or METAENS_CACHE_DIR)");
    add_train_flags(mt_cmd, mt.train);
    add_select_flags(mt_cmd, mt.sel);

    SelectOpts se;
    auto* se_cmd = app.add_subcommand("select", "pick an ensemble for an unlabeled dataset");
    se.cmd = se_cmd;
    se_cmd->add_option("--model", se.model_path, "model JSON from meta-train")->required();
    se_cmd->add_option("--data", se.data_path, "dataset CSV (labels ignored if present)")
        ->required();
    se_cmd->add_option("--pool", se.pool.pool_path, "pool grid file (default: builtin grid)");
    se_cmd->add_option("--label-col", se.label_col, "label column to ignore")
        ->capture_default_str();
    se_cmd->add_option("--out-dir", se.out_dir, "output directory")->capture_default_str();
    se_cmd->add_option("--eta", se.eta, "budget override (0 = model default)");
    se_cmd->add_option("--k-top", se.k_top, "top-k override (0 = model default)");
    se_cmd->add_option("--cache-dir", se.cache_dir, "score cache root (or METAENS_CACHE_DIR)");
    se_cmd->add_option("--dump-similarity", se.dump_similarity,
                       "write pairwise top-k Jaccard matrix CSV");
    add_select_flags(se_cmd, se.sel);

    EvaluateOpts ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "score a ranking against labels");
    ev_cmd->add_option("--scores", ev.scores_path, "score CSV, one score per line")->required();
    ev_cmd->add_option("--data", ev.data_path, "labeled dataset CSV")->required();
    ev_cmd->add_option("--label-col", ev.label_col, "label column name")->capture_default_str();
    ev_cmd->add_option("--auc-ties", ev.auc_ties, "half | strict")
        ->check(CLI::IsMember({"half", "strict"}))
        ->capture_default_str();
    ev_cmd->add_option("--out", ev.out_path, "report JSON path (default: stdout)");

    BenchmarkOpts bm;
    auto* bm_cmd = app.add_subcommand("benchmark", "compare methods on held-out datasets");
    bm_cmd->add_option("--meta", bm.meta_dir, "labeled meta-training directory")->required();
    bm_cmd->add_option("--test", bm.test_dir, "labeled held-out directory")->required();
    bm_cmd->add_option("--out", bm.out_path, "results CSV path")->required();
    bm_cmd->add_option("--summary", bm.summary_path, "also write the summary to a file");
    bm_cmd->add_option("--methods", bm.methods,
                       "metaens | random-ens:<k> | singleton | global-best | mega | "
                       "greedy-oracle")
        ->delimiter(',')
        ->capture_default_str();
    bm_cmd->add_option("--seeds", bm.seeds, "seeds for randomized baselines")
        ->delimiter(',')
        ->capture_default_str();
    bm_cmd->add_option("--pool-subsample", bm.pool_subsample,
                       "pool-size sweep: retrain on random sub-pools of these sizes")
        ->delimiter(',');
    bm_cmd->add_option("--pool", bm.pool.pool_path, "pool grid file (default: builtin grid)");
    bm_cmd->add_option("--family-mode", bm.pool.family_mode, "fine | coarse")
        ->check(CLI::IsMember({"fine", "coarse"}))
        ->capture_default_str();
    bm_cmd->add_option("--label-col", bm.label_col, "label column name")->capture_default_str();
    bm_cmd->add_option("--cache-dir", bm.cache_dir, "score cache root (or METAENS_CACHE_DIR)");
    add_train_flags(bm_cmd, bm.train);
    add_select_flags(bm_cmd, bm.sel);

    AblateOpts ab;
    auto* ab_cmd = app.add_subcommand("ablate", "sweep one knob and report mean AP");
    ab_cmd->add_option("--axis", ab.axis, "combiner | epsilon | tau | beta | lambda | family-mode")
        ->required()
        ->check(CLI::IsMember({"combiner", "epsilon", "tau", "beta", "lambda", "family-mode"}));
    ab_cmd->add_option("--meta", ab.meta_dir, "labeled meta-training directory")->required();
    ab_cmd->add_option("--test", ab.test_dir, "labeled held-out directory")->required();
    ab_cmd->add_option("--out", ab.out_path, "sweep CSV path")->required();
    ab_cmd->add_option("--pool", ab.pool.pool_path, "pool grid file (default: builtin grid)");
    ab_cmd->add_option("--family-mode", ab.pool.family_mode, "fine | coarse (non family-mode axes)")
        ->check(CLI::IsMember({"fine", "coarse"}))
        ->capture_default_str();
    ab_cmd->add_option("--label-col", ab.label_col, "label column name")->capture_default_str();
    ab_cmd->add_option("--cache-dir", ab.cache_dir, "score cache root (or METAENS_CACHE_DIR)");
    add_train_flags(ab_cmd, ab.train);
    add_select_flags(ab_cmd, ab.sel);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help/version exit 0, any usage problem exits 1
    }

    try {
        if (*gs_cmd) return run_gen_synth(gs);
        if (*mt_cmd) return run_meta_train(mt);
        if (*se_cmd) return run_select(se);
        if (*ev_cmd) return run_evaluate(ev);
        if (*bm_cmd) return run_benchmark(bm);
        if (*ab_cmd) return run_ablate(ab);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
