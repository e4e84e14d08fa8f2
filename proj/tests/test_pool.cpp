#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "metaens/errors.hpp"
#include "metaens/pool_config.hpp"

using namespace metaens;

namespace {

// Repo-anchored path so the test passes regardless of the working directory.
std::string repo_file(const std::string& rel) {
    return (std::filesystem::path(__FILE__).parent_path().parent_path() / rel).string();
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/metaens_pool_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("cartesian grid per family") {
    TempFile f("knn6.toml",
               "[pool]\nbase_seed = 7\n[knn]\nk = [5, 10]\nmethod = [\"largest\", \"mean\", "
               "\"median\"]\n");
    PoolGridConfig cfg = parse_pool_config(f.path);
    CHECK(cfg.base_seed == 7);
    ModelPool pool = build_pool(cfg, FamilyMode::FINE);
    CHECK(pool.specs.size() == 6);
    for (const auto& s : pool.specs) CHECK(s.family == Family::KNN);
}

TEST_CASE("default grid has 72 members across seven families") {
    ModelPool pool = build_pool(default_grid(), FamilyMode::FINE);
    CHECK(pool.specs.size() == 72);

    std::map<Family, int> per_family;
    for (const auto& s : pool.specs) per_family[s.family]++;
    CHECK(per_family[Family::KNN] == 15);
    CHECK(per_family[Family::LOF] == 10);
    CHECK(per_family[Family::HBOS] == 8);
    CHECK(per_family[Family::IFOREST] == 9);
    CHECK(per_family[Family::LODA] == 12);
    CHECK(per_family[Family::ABOD] == 12);
    CHECK(per_family[Family::COF] == 6);
}

TEST_CASE("shipped config file reproduces the builtin grid") {
    PoolGridConfig file_cfg = parse_pool_config(repo_file("configs/pool_default.toml"));
    ModelPool from_file = build_pool(file_cfg, FamilyMode::FINE);
    ModelPool builtin = build_pool(default_grid(), FamilyMode::FINE);
    CHECK(from_file.ids() == builtin.ids());
    CHECK(from_file.pool_hash() == builtin.pool_hash());
}

TEST_CASE("pool is sorted by id with duplicates collapsed") {
    TempFile f("dup.toml", "[knn]\nk = [5, 5, 10]\nmethod = [\"mean\"]\n");
    ModelPool pool = build_pool(parse_pool_config(f.path), FamilyMode::FINE);
    CHECK(pool.specs.size() == 2);  // duplicate k=5 collapses
    auto ids = pool.ids();
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    std::set<std::string> uniq(ids.begin(), ids.end());
    CHECK(uniq.size() == ids.size());
}

TEST_CASE("by_id finds members and rejects strangers") {
    ModelPool pool = build_pool(default_grid(), FamilyMode::FINE);
    const auto& s = pool.by_id("knn_k=5_method=mean");
    CHECK(s.family == Family::KNN);
    CHECK_THROWS_AS(pool.by_id("knn_k=999_method=mean"), DataError);
}

TEST_CASE("pool_hash tracks membership") {
    TempFile a("ha.toml", "[knn]\nk = [5]\nmethod = [\"mean\"]\n");
    TempFile b("hb.toml", "[knn]\nk = [5]\nmethod = [\"mean\", \"median\"]\n");
    ModelPool pa = build_pool(parse_pool_config(a.path), FamilyMode::FINE);
    ModelPool pb = build_pool(parse_pool_config(b.path), FamilyMode::FINE);
    ModelPool pa2 = build_pool(parse_pool_config(a.path), FamilyMode::FINE);
    CHECK(pa.pool_hash() == pa2.pool_hash());
    CHECK(pa.pool_hash() != pb.pool_hash());
}

TEST_CASE("parse errors carry the line number") {
    TempFile junk("junk.toml", "[knn]\nk = [5]\nmethod = [\"mean\"]\nwat\n");
    CHECK_THROWS_WITH_AS(parse_pool_config(junk.path),
                         doctest::Contains(":4"), DataError);

    TempFile badsec("badsec.toml", "[knn\nk = [5]\n");
    CHECK_THROWS_WITH_AS(parse_pool_config(badsec.path),
                         doctest::Contains(":1"), DataError);

    TempFile unknown("unknown.toml", "[superduper]\nk = [5]\n");
    CHECK_THROWS_AS(parse_pool_config(unknown.path), DataError);

    TempFile stray("stray.toml", "k = [5]\n");
    CHECK_THROWS_AS(parse_pool_config(stray.path), DataError);

    CHECK_THROWS_AS(parse_pool_config("/tmp/metaens_pool_nonexistent.toml"), DataError);
}

TEST_CASE("ocsvm cannot appear in a fit grid") {
    TempFile f("ocsvm.toml", "[ocsvm]\nnu = [0.5]\n");
    CHECK_THROWS_WITH_AS(parse_pool_config(f.path),
                         doctest::Contains("ocsvm"), DataError);
}

TEST_CASE("invalid grid values are rejected at build time") {
    TempFile f("badval.toml", "[knn]\nk = [0]\nmethod = [\"mean\"]\n");
    CHECK_THROWS_AS(build_pool(parse_pool_config(f.path), FamilyMode::FINE), DataError);

    TempFile g("badparam.toml", "[knn]\nk = [5]\nmethod = [\"mean\"]\nweird = [1]\n");
    CHECK_THROWS_AS(build_pool(parse_pool_config(g.path), FamilyMode::FINE), DataError);
}

TEST_CASE("randomized members get distinct derived seeds") {
    TempFile f("seeds.toml",
               "[pool]\nbase_seed = 42\n[iforest]\ntrees = [50, 100]\nmax_features = "
               "[0.6]\npsi = [64]\n");
    ModelPool pool = build_pool(parse_pool_config(f.path), FamilyMode::FINE);
    REQUIRE(pool.specs.size() == 2);
    CHECK(pool.specs[0].seed != pool.specs[1].seed);

    // Same grid, same base seed -> identical member seeds.
    ModelPool again = build_pool(parse_pool_config(f.path), FamilyMode::FINE);
    CHECK(pool.specs[0].seed == again.specs[0].seed);
}
