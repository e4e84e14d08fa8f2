#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "metaens/errors.hpp"
#include "metaens/synth.hpp"

using namespace metaens;

TEST_CASE("generation is bit-identical across runs") {
    SynthSpec spec;
    spec.n_inliers = 100;
    spec.n_anomaly_global = 5;
    spec.n_anomaly_local = 5;
    spec.dim = 2;
    spec.n_clusters = 3;
    spec.seed = 1;

    Dataset a = generate_synthetic(spec, "s");
    Dataset b = generate_synthetic(spec, "s");
    CHECK(a.features.data == b.features.data);  // exact, not approximate
    REQUIRE(a.labeled());
    CHECK(*a.labels == *b.labels);

    spec.seed = 2;
    Dataset c = generate_synthetic(spec, "s");
    CHECK(a.features.data != c.features.data);
}

TEST_CASE("labels count the planted anomalies") {
    SynthSpec spec;
    spec.n_inliers = 100;
    spec.n_anomaly_global = 5;
    spec.n_anomaly_local = 5;
    spec.dim = 2;
    spec.seed = 1;

    Dataset d = generate_synthetic(spec, "s");
    CHECK(d.n() == 110);
    CHECK(d.dim() == 2);
    REQUIRE(d.labeled());
    size_t sum = std::accumulate(d.labels->begin(), d.labels->end(), size_t{0});
    CHECK(sum == 10);

    // Inliers occupy the leading rows, anomalies the trailing ones.
    for (size_t i = 0; i < 100; ++i) CHECK((*d.labels)[i] == 0);
    for (size_t i = 100; i < 110; ++i) CHECK((*d.labels)[i] == 1);
}

TEST_CASE("invalid specs are rejected") {
    SynthSpec spec;
    spec.n_inliers = 10;
    spec.n_anomaly_global = 5;
    spec.n_anomaly_local = 5;  // contamination 10/20 = 0.5, not < 0.5
    CHECK_THROWS_AS(generate_synthetic(spec, "s"), DataError);

    spec.n_anomaly_global = 0;
    spec.n_anomaly_local = 0;  // contamination 0, not > 0
    CHECK_THROWS_AS(generate_synthetic(spec, "s"), DataError);

    spec.n_anomaly_global = 1;
    spec.dim = 0;
    CHECK_THROWS_AS(generate_synthetic(spec, "s"), DataError);

    spec.dim = 2;
    spec.n_clusters = 0;
    CHECK_THROWS_AS(generate_synthetic(spec, "s"), DataError);
}

TEST_CASE("synth_file_name is a pure function of the spec") {
    SynthSpec a, b;
    a.seed = b.seed = 9;
    CHECK(synth_file_name(a) == synth_file_name(b));
    b.seed = 10;
    CHECK(synth_file_name(a) != synth_file_name(b));
    CHECK(synth_file_name(a).find(".csv") != std::string::npos);
}

TEST_CASE("write_dataset_csv round-trips through load_dataset") {
    SynthSpec spec;
    spec.n_inliers = 40;
    spec.n_anomaly_global = 3;
    spec.n_anomaly_local = 2;
    spec.dim = 3;
    spec.seed = 7;
    Dataset d = generate_synthetic(spec, "round");

    std::string path = "/tmp/metaens_synth_round.csv";
    write_dataset_csv(d, path);
    Dataset back = load_dataset(path, std::string("label"));
    std::remove(path.c_str());

    REQUIRE(back.n() == d.n());
    REQUIRE(back.dim() == d.dim());
    REQUIRE(back.labeled());
    CHECK(*back.labels == *d.labels);
    for (size_t r = 0; r < d.n(); ++r)
        for (size_t c = 0; c < d.dim(); ++c)
            CHECK(back.features.at(r, c) == d.features.at(r, c));  // %.17g exact
}
