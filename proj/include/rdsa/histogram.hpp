#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rdsa/dataset.hpp"
#include "rdsa/rng.hpp"

#include "json.hpp"

namespace rdsa {

enum class BinningMode {
    equal_width,       // default; bins span [min, max] with constant width
    equal_population,  // edges at value quantiles, roughly equal counts per bin
};

// Finely binned empirical distribution of one feature. Frequencies are
// normalized counts and double as sampling probabilities.
struct FeatureHistogram {
    std::vector<double> bin_edges;    // B+1, strictly increasing
    std::vector<double> frequencies;  // B, non-negative, sums to 1
    std::size_t feature_index = 0;
    std::vector<double> cumulative;   // derived prefix sums, last entry 1

    static FeatureHistogram from_values(std::span<const double> values, std::size_t bins,
                                        std::size_t feature_index,
                                        BinningMode mode = BinningMode::equal_width);

    std::size_t bin_count() const { return frequencies.size(); }

    // Bin index for a value; out-of-range values clip into the end bins,
    // values equal to the top edge fall in the last bin.
    std::size_t locate_bin(double v) const;

    // Inverse-CDF draw over the cumulative table. Zero-mass bins are never
    // chosen; ties at cumulative boundaries resolve to the higher-index bin.
    std::size_t sample_bin(Rng& rng) const;

    void rebuild_cumulative();
    void validate() const;
};

// Histograms for a set of features, all built from the same dataset. The
// fingerprint records where they came from so downstream stages can verify
// provenance (e.g. no leakage from test data into augmentation).
struct HistogramSet {
    std::vector<FeatureHistogram> histograms;
    std::size_t source_rows = 0;
    std::string source_role;

    const FeatureHistogram& at(std::size_t feature_index) const;
    bool covers(std::span<const std::size_t> features) const;
    std::vector<std::size_t> feature_indices() const;

private:
    friend HistogramSet build_histograms(const Dataset&, std::span<const std::size_t>,
                                         std::size_t, BinningMode, std::string_view);
    friend HistogramSet histogram_set_from_json(const nlohmann::json&);
    void rebuild_lookup();
    std::unordered_map<std::size_t, std::size_t> lookup_;
};

HistogramSet build_histograms(const Dataset& d, std::span<const std::size_t> features,
                              std::size_t bins, BinningMode mode = BinningMode::equal_width,
                              std::string_view role = "");

// Value drawn by picking a bin with probability = its frequency, then
// uniformly within the bin's [lo, hi) range.
double sample_value(const FeatureHistogram& h, Rng& rng);

// Jensen-Shannon distance between two discrete distributions over the same
// bins: sqrt((KL(p||m) + KL(q||m)) / 2) with m the pointwise mean, natural
// log. Inputs are normalized internally; zero entries contribute zero.
double js_distance(std::span<const double> p, std::span<const double> q);

// Bins `values` onto h_ref's edges (clipping out-of-range values into the
// terminal bins) and returns the Jensen-Shannon distance to h_ref.
double jsd_between(const FeatureHistogram& h_ref, std::span<const double> values);

nlohmann::json to_json(const FeatureHistogram& h);
nlohmann::json to_json(const HistogramSet& set);
FeatureHistogram feature_histogram_from_json(const nlohmann::json& j);
HistogramSet histogram_set_from_json(const nlohmann::json& j);

}  // namespace rdsa
