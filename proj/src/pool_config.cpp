#include "metaens/pool_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metaens/errors.hpp"

namespace metaens {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> parse_value_list(const std::string& v, const std::string& where) {
    std::vector<std::string> out;
    std::string body = v;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') throw DataError(where + ": unterminated list");
        body = body.substr(1, body.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) throw DataError(where + ": empty list element");
            out.push_back(unquote(item));
        }
        if (out.empty()) throw DataError(where + ": empty list");
    } else {
        out.push_back(unquote(body));
    }
    return out;
}

}  // namespace

PoolGridConfig parse_pool_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pool config: " + path);

    PoolGridConfig cfg;
    cfg.families.clear();
    std::string section;
    FamilyGrid* current = nullptr;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string where = path + ":" + std::to_string(lineno);
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw DataError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section == "pool") {
                current = nullptr;
            } else {
                Family f = family_from_name(section);  // throws on junk
                if (f == Family::OCSVM)
                    throw DataError(where + ": ocsvm has no built-in scorer and cannot be "
                                            "part of a fit grid");
                cfg.families.push_back(FamilyGrid{f, {}});
                current = &cfg.families.back();
            }
            continue;
        }

        size_t eq = line.find('=');
        if (eq == std::string::npos) throw DataError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw DataError(where + ": expected key = value");

        if (section == "pool") {
            if (key == "base_seed") {
                char* end = nullptr;
                cfg.base_seed = std::strtoull(value.c_str(), &end, 10);
                if (*end != '\0') throw DataError(where + ": base_seed must be an integer");
            } else {
                throw DataError(where + ": unknown [pool] key '" + key + "'");
            }
            continue;
        }
        if (!current) throw DataError(where + ": key outside any section");
        current->params.emplace_back(key, parse_value_list(value, where));
    }
    if (cfg.families.empty()) throw DataError(path + ": no detector family sections");
    return cfg;
}

PoolGridConfig default_grid() {
    PoolGridConfig cfg;
    cfg.base_seed = 42;
    cfg.families = {
        {Family::KNN,
         {{"k", {"5", "15", "35", "60", "100"}}, {"method", {"largest", "mean", "median"}}}},
        {Family::LOF,
         {{"k", {"5", "15", "35", "60", "100"}}, {"metric", {"euclidean", "manhattan"}}}},
        {Family::HBOS, {{"bins", {"5", "10", "20", "50"}}, {"tol", {"0.1", "0.5"}}}},
        {Family::IFOREST,
         {{"trees", {"50", "100", "200"}},
          {"max_features", {"0.3", "0.6", "0.9"}},
          {"psi", {"256"}}}},
        {Family::LODA,
         {{"projections", {"10", "25", "50", "100"}}, {"bins", {"10", "20", "50"}}}},
        {Family::ABOD,
         {{"k", {"5", "10", "15", "20", "25", "35", "40", "50", "60", "70", "80", "100"}}}},
        {Family::COF, {{"k", {"5", "10", "15", "35", "60", "100"}}}},
    };
    return cfg;
}

ModelPool build_pool(const PoolGridConfig& cfg, FamilyMode mode) {
    ModelPool pool;
    pool.mode = mode;
    for (const auto& grid : cfg.families) {
        if (grid.params.empty())
            throw DataError("pool grid: " + family_name(grid.family) + ": no params");
        // Odometer over the value lists; each position is one member.
        std::vector<size_t> pos(grid.params.size(), 0);
        for (;;) {
            std::vector<std::pair<std::string, std::string>> params;
            for (size_t i = 0; i < grid.params.size(); ++i)
                params.emplace_back(grid.params[i].first, grid.params[i].second[pos[i]]);
            pool.specs.push_back(make_spec(grid.family, std::move(params), cfg.base_seed));

            size_t i = 0;
            while (i < pos.size() && ++pos[i] == grid.params[i].second.size()) pos[i++] = 0;
            if (i == pos.size()) break;
        }
    }
    std::sort(pool.specs.begin(), pool.specs.end(),
              [](const DetectorSpec& a, const DetectorSpec& b) { return a.id < b.id; });
    pool.specs.erase(std::unique(pool.specs.begin(), pool.specs.end(),
                                 [](const DetectorSpec& a, const DetectorSpec& b) {
                                     return a.id == b.id;
                                 }),
                     pool.specs.end());
    if (pool.specs.empty()) throw DataError("pool grid: empty pool");
    return pool;
}

}  // namespace metaens
