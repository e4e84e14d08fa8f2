#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metaens/detectors.hpp"

namespace metaens {

// Detector grid in a restricted toml-like format:
//
//   [pool]
//   base_seed = 42
//   [knn]
//   k = [5, 15, 35]
//   method = ["largest", "mean"]
//
// One section per family, each key lists the values to cross. Members are
// the per-family Cartesian product; ids are canonical; the pool is sorted by
// id with duplicates dropped.
struct FamilyGrid {
    Family family;
    std::vector<std::pair<std::string, std::vector<std::string>>> params;
};

struct PoolGridConfig {
    uint64_t base_seed = 42;
    std::vector<FamilyGrid> families;
};

PoolGridConfig parse_pool_config(const std::string& path);

// Built-in 72-member grid covering all seven scoring families.
PoolGridConfig default_grid();

ModelPool build_pool(const PoolGridConfig& cfg, FamilyMode mode);

}  // namespace metaens
