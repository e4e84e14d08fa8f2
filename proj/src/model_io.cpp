#include <zlib.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "metaens/errors.hpp"
#include "metaens/meta_model.hpp"

using nlohmann::json;

namespace metaens {

const char* kToolVersion = "metaens 0.1.0";

namespace {

std::string family_mode_name(FamilyMode m) {
    return m == FamilyMode::FINE ? "fine" : "coarse";
}

FamilyMode family_mode_from_name(const std::string& s) {
    if (s == "fine") return FamilyMode::FINE;
    if (s == "coarse") return FamilyMode::COARSE;
    throw DataError("unknown family mode: " + s + " (fine|coarse)");
}

json forest_to_json(const Forest& f) {
    json trees = json::array();
    for (const auto& tree : f.trees) {
        json t;
        auto& feature = t["feature"] = json::array();
        auto& threshold = t["threshold"] = json::array();
        auto& left = t["left"] = json::array();
        auto& right = t["right"] = json::array();
        auto& value = t["value"] = json::array();
        for (const auto& n : tree) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        trees.push_back(std::move(t));
    }
    return json{{"kind", f.kind == ForestKind::MEAN_PROB ? "mean_prob" : "median_leaf"},
                {"n_trees", f.n_trees},
                {"seed", f.seed},
                {"trees", std::move(trees)}};
}

Forest forest_from_json(const json& j, const std::string& path) {
    Forest f;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "mean_prob") f.kind = ForestKind::MEAN_PROB;
    else if (kind == "median_leaf") f.kind = ForestKind::MEDIAN_LEAF;
    else throw DataError(path + ": unknown forest kind '" + kind + "'");
    f.n_trees = j.at("n_trees").get<size_t>();
    f.seed = j.at("seed").get<uint64_t>();
    for (const auto& t : j.at("trees")) {
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& value = t.at("value");
        size_t n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n ||
            value.size() != n)
            throw DataError(path + ": ragged tree node arrays");
        std::vector<TreeNode> tree(n);
        for (size_t i = 0; i < n; ++i) {
            tree[i].feature = feature[i].get<int>();
            tree[i].threshold = threshold[i].get<double>();
            tree[i].left = left[i].get<int>();
            tree[i].right = right[i].get<int>();
            tree[i].value = value[i].get<double>();
            if (tree[i].feature >= static_cast<int>(kStateDim))
                throw DataError(path + ": node feature index out of range");
            if (tree[i].feature >= 0 &&
                (tree[i].left < 0 || tree[i].right < 0 ||
                 tree[i].left >= static_cast<int>(n) || tree[i].right >= static_cast<int>(n)))
                throw DataError(path + ": node child index out of range");
        }
        f.trees.push_back(std::move(tree));
    }
    if (f.trees.size() != f.n_trees) throw DataError(path + ": tree count mismatch");
    return f;
}

json config_to_json(const ModelConfig& c) {
    return json{{"tau1", c.tau1},
                {"tau2", c.tau2},
                {"beta", c.beta},
                {"lambda_fam", c.lambda_fam},
                {"k_top", c.k_top},
                {"eta", c.eta},
                {"combiner", combiner_name(c.combiner)},
                {"risk_percentile", c.risk_percentile},
                {"family_mode", family_mode_name(c.family_mode)}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.tau1 = j.at("tau1").get<double>();
    c.tau2 = j.at("tau2").get<double>();
    c.beta = j.at("beta").get<double>();
    c.lambda_fam = j.at("lambda_fam").get<double>();
    c.k_top = j.at("k_top").get<size_t>();
    c.eta = j.at("eta").get<size_t>();
    c.combiner = combiner_from_name(j.at("combiner").get<std::string>());
    c.risk_percentile = j.at("risk_percentile").get<double>();
    c.family_mode = family_mode_from_name(j.at("family_mode").get<std::string>());
    return c;
}

}  // namespace

void save_model(const TwoPartGainModel& model, const std::string& path) {
    json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["feature_layout_version"] = model.config.feature_layout_version;
    doc["tool_version"] = kToolVersion;
    doc["config"] = config_to_json(model.config);
    doc["family_risk"] = model.family_risk;
    doc["family_counts"] = model.family_counts;
    doc["primary_perf"] = model.primary_perf;
    doc["cls"] = forest_to_json(model.cls);
    doc["reg"] = forest_to_json(model.reg);

    // CRC over the canonical dump without the crc field itself.
    std::string payload = doc.dump();
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                      static_cast<uInt>(payload.size()));
    doc["crc32"] = static_cast<uint64_t>(crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    out << doc.dump() << '\n';
    if (!out) throw DataError("write failed: " + path);
}

TwoPartGainModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError(path + ": corrupt model file (JSON parse): " + e.what());
    }

    int fmt = doc.value("format_version", -1);
    if (fmt != kModelFormatVersion)
        throw DataError(path + ": model format version " + std::to_string(fmt) +
                        " unsupported (this build reads version " +
                        std::to_string(kModelFormatVersion) + ")");

    if (!doc.contains("crc32")) throw DataError(path + ": missing checksum");
    uint64_t stored = doc.at("crc32").get<uint64_t>();
    doc.erase("crc32");
    std::string payload = doc.dump();
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                      static_cast<uInt>(payload.size()));
    if (static_cast<uint64_t>(crc) != stored)
        throw DataError(path + ": checksum mismatch, file is corrupt or was edited");

    int layout = doc.at("feature_layout_version").get<int>();
    if (layout != kFeatureLayoutVersion)
        throw DataError(path + ": feature layout v" + std::to_string(layout) +
                        " does not match this build (v" +
                        std::to_string(kFeatureLayoutVersion) +
                        "); retrain the model");

    TwoPartGainModel m;
    m.config = config_from_json(doc.at("config"));
    m.config.feature_layout_version = layout;
    m.family_risk = doc.at("family_risk").get<std::map<std::string, double>>();
    m.family_counts = doc.at("family_counts").get<std::map<std::string, size_t>>();
    m.primary_perf = doc.at("primary_perf").get<std::map<std::string, double>>();
    m.cls = forest_from_json(doc.at("cls"), path);
    m.reg = forest_from_json(doc.at("reg"), path);
    for (const auto& [key, v] : m.family_risk)
        if (!(v >= 0.0)) throw DataError(path + ": negative family risk for " + key);
    return m;
}

}  // namespace metaens
