#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "metaens/dataset.hpp"
#include "metaens/errors.hpp"
#include "metaens/prng.hpp"

using namespace metaens;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/metaens_ds_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

Dataset column_dataset(const std::vector<double>& col) {
    Dataset d;
    d.id = "col";
    d.features = Matrix(col.size(), 1);
    for (size_t r = 0; r < col.size(); ++r) d.features.at(r, 0) = col[r];
    return d;
}

}  // namespace

TEST_CASE("load_dataset splits out the label column") {
    TempFile f("labeled.csv", "x,label\n1,0\n2,0\n3,1\n4,0\n");
    Dataset d = load_dataset(f.path, std::string("label"));
    CHECK(d.n() == 4);
    CHECK(d.dim() == 1);
    REQUIRE(d.labeled());
    CHECK((*d.labels)[2] == 1);
    CHECK(d.features.at(3, 0) == 4.0);
    CHECK(d.id == "metaens_ds_labeled");
}

TEST_CASE("load_dataset without label column keeps both features") {
    TempFile f("unlabeled.csv", "x,label\n1,0\n2,0\n3,1\n4,0\n");
    Dataset d = load_dataset(f.path);
    CHECK(d.n() == 4);
    CHECK(d.dim() == 2);
    CHECK_FALSE(d.labeled());
}

TEST_CASE("load_dataset errors name the bad cell") {
    TempFile f("badcell.csv", "x,y\n1,2\n3,oops\n");
    CHECK_THROWS_WITH_AS(load_dataset(f.path),
                         doctest::Contains("row 3, column 2"), DataError);
}

TEST_CASE("load_dataset rejects non-binary labels and short files") {
    TempFile f("badlabel.csv", "x,label\n1,0\n2,2\n");
    CHECK_THROWS_WITH_AS(load_dataset(f.path, std::string("label")),
                         doctest::Contains("label must be 0 or 1"), DataError);

    TempFile g("short.csv", "x\n1\n");
    CHECK_THROWS_AS(load_dataset(g.path), DataError);

    TempFile h("nolabel.csv", "x,y\n1,2\n3,4\n");
    CHECK_THROWS_WITH_AS(load_dataset(h.path, std::string("cls")),
                         doctest::Contains("label column"), DataError);
}

TEST_CASE("load_dataset records missing cells as NaN") {
    TempFile f("missing.csv", "x,y\n1,\n2,5\n");
    Dataset d = load_dataset(f.path);
    CHECK(std::isnan(d.features.at(0, 1)));
    CHECK(d.features.at(1, 1) == 5.0);
}

TEST_CASE("quantile_sorted uses fractional-index interpolation") {
    std::vector<double> v{1, 2, 3, 100};
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile_sorted(v, 0.75) == doctest::Approx(27.25));
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 100.0);
    std::vector<double> one{7.0};
    CHECK(quantile_sorted(one, 0.3) == 7.0);
}

TEST_CASE("preprocess applies median/IQR scaling") {
    // Column [1,2,3,100]: median 2.5, Q1 1.75, Q3 27.25, IQR 25.5.
    Dataset d = preprocess(column_dataset({1, 2, 3, 100}));
    CHECK(d.features.at(0, 0) == doctest::Approx(-0.058823529411764705).epsilon(1e-12));
    CHECK(d.features.at(1, 0) == doctest::Approx(-0.0196078431372549).epsilon(1e-12));
    CHECK(d.features.at(2, 0) == doctest::Approx(0.0196078431372549).epsilon(1e-12));
    CHECK(d.features.at(3, 0) == doctest::Approx(3.8235294117647056).epsilon(1e-12));
}

TEST_CASE("preprocess zeroes any zero-IQR column") {
    Dataset c = preprocess(column_dataset({5, 5, 5}));
    for (size_t r = 0; r < 3; ++r) CHECK(c.features.at(r, 0) == 0.0);

    // Not constant, but both quartiles land on 0 so IQR = 0.
    Dataset z = preprocess(column_dataset({0, 0, 0, 0, 0, 9}));
    for (size_t r = 0; r < 6; ++r) CHECK(z.features.at(r, 0) == 0.0);
}

TEST_CASE("preprocess imputes the column median before scaling") {
    // [1, NaN, 3] -> impute 2 -> median 2, IQR 1 -> [-1, 0, 1].
    Dataset d = preprocess(column_dataset({1, kNaN, 3}));
    CHECK(d.features.at(0, 0) == doctest::Approx(-1.0));
    CHECK(d.features.at(1, 0) == doctest::Approx(0.0));
    CHECK(d.features.at(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("preprocess rejects all-missing and infinite columns") {
    CHECK_THROWS_WITH_AS(preprocess(column_dataset({kNaN, kNaN})),
                         doctest::Contains("all missing"), DataError);
    CHECK_THROWS_AS(preprocess(column_dataset({1.0, std::numeric_limits<double>::infinity()})),
                    DataError);
}

TEST_CASE("preprocess is affine-invariant up to sign") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> col(17);
        for (auto& v : col) v = rng.normal() * 3.0;
        double a = rng.uniform(-4.0, 4.0);
        if (a == 0.0) a = 1.0;
        double b = rng.uniform(-10.0, 10.0);

        std::vector<double> scaled(col.size());
        for (size_t i = 0; i < col.size(); ++i) scaled[i] = a * col[i] + b;

        Dataset base = preprocess(column_dataset(col));
        Dataset aff = preprocess(column_dataset(scaled));
        double sign = a > 0 ? 1.0 : -1.0;
        for (size_t r = 0; r < col.size(); ++r)
            CHECK(aff.features.at(r, 0) ==
                  doctest::Approx(sign * base.features.at(r, 0)).epsilon(1e-9));
    }
}

TEST_CASE("preprocess missing indicators are opt-in") {
    Dataset d;
    d.id = "two";
    d.features = Matrix(3, 2);
    double vals[3][2] = {{1, 10}, {kNaN, 20}, {3, 30}};
    for (size_t r = 0; r < 3; ++r)
        for (size_t c = 0; c < 2; ++c) d.features.at(r, c) = vals[r][c];

    CHECK(preprocess(d).dim() == 2);

    Dataset wide = preprocess(d, true);
    REQUIRE(wide.dim() == 3);
    CHECK(wide.features.at(0, 2) == 0.0);
    CHECK(wide.features.at(1, 2) == 1.0);
    CHECK(wide.features.at(2, 2) == 0.0);
    // Scaled feature columns are unchanged by the flag.
    Dataset narrow = preprocess(d);
    for (size_t r = 0; r < 3; ++r)
        for (size_t c = 0; c < 2; ++c)
            CHECK(wide.features.at(r, c) == narrow.features.at(r, c));
}

TEST_CASE("normalize_scores maps to the unit interval") {
    auto v = normalize_scores({2, 4, 6});
    CHECK(v[0] == 0.0);
    CHECK(v[1] == doctest::Approx(0.5));
    CHECK(v[2] == 1.0);

    auto c = normalize_scores({7, 7, 7});
    for (double x : c) CHECK(x == 0.5);

    auto w = normalize_scores({-1, 0, 3});
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(w[2] == 1.0);
}

TEST_CASE("normalize_scores rejects bad input") {
    CHECK_THROWS_AS(normalize_scores({}), DataError);
    CHECK_THROWS_AS(normalize_scores({1.0, kNaN}), DataError);
    CHECK_THROWS_AS(normalize_scores({1.0, std::numeric_limits<double>::infinity()}), DataError);
}

TEST_CASE("normalize_scores is idempotent and rank-preserving") {
    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> raw(40);
        for (auto& v : raw) v = rng.uniform(-50.0, 50.0);
        // Inject ties so rank preservation covers them.
        raw[5] = raw[9];
        raw[0] = raw[1];

        auto once = normalize_scores(raw);
        auto twice = normalize_scores(once);
        for (size_t i = 0; i < raw.size(); ++i)
            CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-15));

        for (size_t i = 0; i < raw.size(); ++i)
            for (size_t j = 0; j < raw.size(); ++j) {
                if (raw[i] < raw[j]) CHECK(once[i] < once[j]);
                if (raw[i] == raw[j]) CHECK(once[i] == once[j]);
            }
    }
}

TEST_CASE("dataset_fingerprint tracks the byte image") {
    Matrix a(2, 2);
    a.at(0, 0) = 1.0;
    a.at(1, 1) = 2.0;
    Matrix b = a;
    CHECK(dataset_fingerprint(a) == dataset_fingerprint(b));
    b.at(0, 1) = 1e-300;
    CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));
}
