// Times the OpenMP-parallel detector kernels against the serial reference
// implementations and verifies they agree bit-for-bit. Usage:
//   bench_kernels [N] [dim] [k] [seed]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "metaens/detectors.hpp"
#include "metaens/reference.hpp"
#include "metaens/synth.hpp"

using namespace metaens;

namespace {

double seconds_of(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

size_t mismatches(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++n;
    return n;
}

uint64_t arg_or(int argc, char** argv, int i, uint64_t fallback) {
    if (argc <= i) return fallback;
    char* end = nullptr;
    uint64_t v = std::strtoull(argv[i], &end, 10);
    if (end == argv[i] || *end != '\0') {
        std::fprintf(stderr, "usage: bench_kernels [N] [dim] [k] [seed]\n");
        std::exit(1);
    }
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    size_t n = arg_or(argc, argv, 1, 1500);
    size_t dim = arg_or(argc, argv, 2, 8);
    size_t k = arg_or(argc, argv, 3, 35);
    uint64_t seed = arg_or(argc, argv, 4, 42);

    SynthSpec spec;
    spec.n_inliers = n - n / 20;
    spec.n_anomaly_global = n / 40;
    spec.n_anomaly_local = n / 20 - n / 40;
    spec.dim = dim;
    spec.seed = seed;
    Dataset d = generate_synthetic(spec, "bench");
    const Matrix& X = d.features;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("N=%zu dim=%zu k=%zu seed=%llu\n", X.rows, X.cols, k,
                static_cast<unsigned long long>(seed));
    std::printf("%-14s %12s %12s %9s %10s\n", "kernel", "parallel(s)", "serial(s)", "speedup",
                "mismatch");

    {
        DetectorSpec s = make_spec(Family::KNN,
                                   {{"k", std::to_string(k)}, {"method", "mean"}}, seed);
        std::vector<double> fast, slow;
        double tf = seconds_of([&] { fast = fit_score(s, X); });
        double ts = seconds_of([&] { slow = ref::knn_scores(X, k, "mean"); });
        std::printf("%-14s %12.3f %12.3f %8.2fx %10zu\n", "knn-mean", tf, ts, ts / tf,
                    mismatches(fast, slow));
    }
    {
        DetectorSpec s = make_spec(Family::LOF,
                                   {{"k", std::to_string(k)}, {"metric", "euclidean"}}, seed);
        std::vector<double> fast, slow;
        double tf = seconds_of([&] { fast = fit_score(s, X); });
        double ts = seconds_of([&] { slow = ref::lof_scores(X, k, false); });
        std::printf("%-14s %12.3f %12.3f %8.2fx %10zu\n", "lof-euclidean", tf, ts, ts / tf,
                    mismatches(fast, slow));
    }
    {
        DetectorSpec s = make_spec(Family::LOF,
                                   {{"k", std::to_string(k)}, {"metric", "manhattan"}}, seed);
        std::vector<double> fast, slow;
        double tf = seconds_of([&] { fast = fit_score(s, X); });
        double ts = seconds_of([&] { slow = ref::lof_scores(X, k, true); });
        std::printf("%-14s %12.3f %12.3f %8.2fx %10zu\n", "lof-manhattan", tf, ts, ts / tf,
                    mismatches(fast, slow));
    }
    return 0;
}
