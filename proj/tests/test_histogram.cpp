#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rdsa/error.hpp"
#include "rdsa/histogram.hpp"

using namespace rdsa;

namespace {

FeatureHistogram from(std::vector<double> values, std::size_t bins,
                      BinningMode mode = BinningMode::equal_width) {
    return FeatureHistogram::from_values(values, bins, 0, mode);
}

}  // namespace

TEST_CASE("build: symmetric two-bin split") {
    const auto h = from({0, 0, 1, 1}, 2);
    REQUIRE(h.bin_count() == 2);
    CHECK(h.frequencies[0] == doctest::Approx(0.5));
    CHECK(h.frequencies[1] == doctest::Approx(0.5));
    CHECK(h.bin_edges.front() == 0.0);
    CHECK(h.bin_edges.back() == 1.0);
}

TEST_CASE("build: hand-counted frequencies over [1,3]") {
    const auto h = from({1, 1, 1, 3}, 2);
    REQUIRE(h.bin_count() == 2);
    CHECK(h.frequencies[0] == doctest::Approx(0.75));  // the three 1s
    CHECK(h.frequencies[1] == doctest::Approx(0.25));  // the max value lands in the last bin
}

TEST_CASE("build: 1000 bins over 1e5 normal draws sums to one") {
    Rng rng(31);
    std::vector<double> values(100000);
    for (double& v : values) v = rng.gaussian();
    const auto h = from(values, 1000);
    REQUIRE(h.bin_count() == 1000);
    double total = 0.0;
    for (double f : h.frequencies) total += f;
    CHECK(std::fabs(total - 1.0) < 1e-9);
    for (std::size_t i = 0; i + 1 < h.bin_edges.size(); ++i)
        CHECK(h.bin_edges[i] < h.bin_edges[i + 1]);
}

TEST_CASE("build: error paths") {
    CHECK_THROWS_AS(static_cast<void>(from({}, 4)), Error);
    try {
        static_cast<void>(from({1.0, std::nan("")}, 4));
        FAIL("expected NonFiniteValue");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::non_finite_value);
    }
}

TEST_CASE("build: constant feature stays within a hair of its value") {
    const auto h = from({5.0, 5.0, 5.0}, 16);
    REQUIRE(h.bin_count() == 1);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(std::fabs(sample_value(h, rng) - 5.0) < 1e-8);
}

TEST_CASE("build twice from the same data is identical") {
    Rng rng(77);
    std::vector<double> values(5000);
    for (double& v : values) v = rng.uniform(-3.0, 9.0);
    const auto a = from(values, 100);
    const auto b = from(values, 100);
    CHECK(a.bin_edges == b.bin_edges);
    CHECK(a.frequencies == b.frequencies);
}

TEST_CASE("equal-population binning produces near-uniform masses") {
    Rng rng(13);
    std::vector<double> values(20000);
    for (double& v : values) v = std::exp(rng.gaussian());  // strongly skewed
    const auto h = from(values, 50, BinningMode::equal_population);
    CHECK(h.bin_count() >= 40);  // ties may merge a few edges
    for (double f : h.frequencies) CHECK(f < 0.06);
    for (std::size_t i = 0; i + 1 < h.bin_edges.size(); ++i)
        CHECK(h.bin_edges[i] < h.bin_edges[i + 1]);
}

TEST_CASE("sample_value: single-bin histogram stays in range") {
    FeatureHistogram h;
    h.bin_edges = {0.0, 1.0};
    h.frequencies = {1.0};
    h.rebuild_cumulative();
    h.validate();
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double v = sample_value(h, rng);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("sample_value: zero-mass bins are never chosen") {
    FeatureHistogram h;
    h.bin_edges = {0.0, 1.0, 2.0, 3.0};
    h.frequencies = {0.5, 0.0, 0.5};
    h.rebuild_cumulative();
    h.validate();
    Rng rng(3);
    for (int i = 0; i < 100000; ++i) {
        const double v = sample_value(h, rng);
        CHECK_FALSE((v >= 1.0 && v < 2.0));
    }

    FeatureHistogram all_first;
    all_first.bin_edges = {0.0, 1.0, 2.0};
    all_first.frequencies = {1.0, 0.0};
    all_first.rebuild_cumulative();
    for (int i = 0; i < 1000; ++i) CHECK(sample_value(all_first, rng) < 1.0);
}

TEST_CASE("sample_value: empirical bin shares converge to frequencies") {
    FeatureHistogram h;
    h.bin_edges = {0.0, 1.0, 2.0};
    h.frequencies = {0.25, 0.75};
    h.rebuild_cumulative();
    Rng rng(4);
    const int m = 1000000;
    int low = 0;
    for (int i = 0; i < m; ++i) low += sample_value(h, rng) < 1.0 ? 1 : 0;
    const double share = static_cast<double>(low) / m;
    // binomial oracle: 3 sigma = 3*sqrt(p(1-p)/m) ~ 0.0013
    CHECK(std::fabs(share - 0.25) < 0.002);
}

TEST_CASE("sampler consistency across many bins") {
    Rng rng(5);
    std::vector<double> values(50000);
    for (double& v : values) v = rng.gaussian();
    const auto h = from(values, 100);

    const std::size_t m = 1000000;
    std::vector<double> counts(h.bin_count(), 0.0);
    Rng sampler(6);
    for (std::size_t i = 0; i < m; ++i) counts[h.sample_bin(sampler)] += 1.0;

    double max_freq = 0.0;
    for (double f : h.frequencies) max_freq = std::max(max_freq, f);
    const double bound = 4.0 * std::sqrt(max_freq / static_cast<double>(m));
    for (std::size_t b = 0; b < h.bin_count(); ++b)
        CHECK(std::fabs(counts[b] / static_cast<double>(m) - h.frequencies[b]) < bound);
}

TEST_CASE("js_distance: identical, disjoint, and oracle equivalence") {
    const std::vector<double> p{0.2, 0.3, 0.5};
    CHECK(js_distance(p, p) == doctest::Approx(0.0).epsilon(1e-12));

    // disjoint supports reach the natural-log upper bound sqrt(ln 2)
    const std::vector<double> a{1.0, 0.0};
    const std::vector<double> b{0.0, 1.0};
    CHECK(js_distance(a, b) == doctest::Approx(std::sqrt(std::log(2.0))));
    CHECK(js_distance(a, b) == doctest::Approx(0.8325546111576977));

    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(20);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform();
            y[i] = rng.below(4) == 0 ? 0.0 : rng.uniform();
        }
        const double mine = js_distance(x, y);
        const double ref = oracle::jsd_direct(x, y);
        CHECK(mine == doctest::Approx(ref).epsilon(1e-12));
        CHECK(mine >= 0.0);
        CHECK(mine <= std::sqrt(std::log(2.0)) + 1e-12);
    }
}

TEST_CASE("jsd_between: samples from the histogram itself converge to zero") {
    Rng rng(9);
    std::vector<double> values(30000);
    for (double& v : values) v = rng.gaussian();
    const auto h = from(values, 50);

    double prev = 1e9;
    Rng sampler(10);
    for (std::size_t m : {100u, 10000u, 1000000u}) {
        std::vector<double> samples(m);
        for (double& s : samples) s = sample_value(h, sampler);
        const double d = jsd_between(h, samples);
        CHECK(d < prev);  // monotone decreasing in expectation over growing m
        prev = d;
    }
    CHECK(prev < 0.02);
}

TEST_CASE("jsd_between clips out-of-range values into terminal bins") {
    const auto h = from({0, 0.5, 1, 1.5, 2}, 4);
    const std::vector<double> wild{-100.0, 0.1, 1.0, 250.0};
    const double d = jsd_between(h, wild);  // must not throw, all mass measured
    CHECK(std::isfinite(d));
}

TEST_CASE("histogram set covers requested features and serializes") {
    Dataset d;
    d.meta = {{"a", true, 0}, {"b", true, 1}, {"c", false, 2}};
    d.num_classes = 2;
    d.features = Matrix(500, 3);
    Rng rng(12);
    for (std::size_t r = 0; r < 500; ++r) {
        d.features(r, 0) = rng.gaussian();
        d.features(r, 1) = rng.uniform(5.0, 6.0);
        d.features(r, 2) = static_cast<double>(r % 2);
        d.labels.push_back(static_cast<int>(r % 2));
    }
    const std::vector<std::size_t> scope{0, 1};
    const HistogramSet set = build_histograms(d, scope, 32, BinningMode::equal_width, "test");
    CHECK(set.covers(scope));
    CHECK_FALSE(set.covers(std::vector<std::size_t>{0, 2}));
    CHECK(set.source_rows == 500);
    CHECK(set.source_role == "test");
    CHECK(set.at(1).bin_edges.front() >= 5.0);
    CHECK_THROWS_AS(static_cast<void>(set.at(2)), Error);

    const auto j = to_json(set);
    const HistogramSet back = histogram_set_from_json(j);
    CHECK(back.source_rows == set.source_rows);
    REQUIRE(back.histograms.size() == set.histograms.size());
    for (std::size_t i = 0; i < set.histograms.size(); ++i) {
        CHECK(back.histograms[i].bin_edges == set.histograms[i].bin_edges);
        CHECK(back.histograms[i].frequencies == set.histograms[i].frequencies);
    }
}
