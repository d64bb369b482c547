#include "rdsa/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "rdsa/error.hpp"

namespace rdsa {

namespace {

constexpr double kFreqSumTol = 1e-9;

std::vector<double> equal_width_edges(double lo, double hi, std::size_t bins) {
    std::vector<double> edges(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + width * static_cast<double>(i);
    edges.back() = hi;  // avoid accumulation drift at the top edge
    return edges;
}

std::vector<double> equal_population_edges(std::vector<double> sorted, std::size_t bins) {
    std::vector<double> edges;
    edges.push_back(sorted.front());
    for (std::size_t i = 1; i < bins; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(sorted.size() - 1) /
                           static_cast<double>(bins);
        const auto k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        const double q = sorted[k] + frac * (sorted[std::min(k + 1, sorted.size() - 1)] - sorted[k]);
        if (q > edges.back()) edges.push_back(q);  // dedupe ties to keep edges strictly increasing
    }
    if (sorted.back() > edges.back()) edges.push_back(sorted.back());
    if (edges.size() < 2) edges.push_back(edges.back() + 1e-9 * std::max(1.0, std::fabs(edges.back())));
    return edges;
}

}  // namespace

FeatureHistogram FeatureHistogram::from_values(std::span<const double> values, std::size_t bins,
                                               std::size_t feature_index, BinningMode mode) {
    if (values.empty())
        throw Error(ErrorKind::data, ErrorCode::empty_feature,
                    "feature " + std::to_string(feature_index) + " has no values");
    if (bins < 1)
        throw Error(ErrorKind::config, ErrorCode::bad_config, "bin count must be >= 1");

    double lo = values[0], hi = values[0];
    for (double v : values) {
        if (!std::isfinite(v))
            throw Error(ErrorKind::data, ErrorCode::non_finite_value,
                        "feature " + std::to_string(feature_index) + " has a non-finite value");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) {
        // constant feature: a single hair-width bin so that edges stay
        // strictly increasing and samples stay within 1e-9 of the value
        hi = lo + 1e-9 * std::max(1.0, std::fabs(lo));
        bins = 1;
    }

    FeatureHistogram h;
    h.feature_index = feature_index;
    if (mode == BinningMode::equal_width) {
        h.bin_edges = equal_width_edges(lo, hi, bins);
    } else {
        std::vector<double> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front() == sorted.back())
            h.bin_edges = {lo, hi};
        else
            h.bin_edges = equal_population_edges(std::move(sorted), bins);
    }

    h.frequencies.assign(h.bin_edges.size() - 1, 0.0);
    const double unit = 1.0 / static_cast<double>(values.size());
    for (double v : values) h.frequencies[h.locate_bin(v)] += unit;
    h.rebuild_cumulative();
    h.validate();
    return h;
}

std::size_t FeatureHistogram::locate_bin(double v) const {
    if (v <= bin_edges.front()) return 0;
    if (v >= bin_edges.back()) return bin_count() - 1;
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
    return static_cast<std::size_t>(it - bin_edges.begin()) - 1;
}

std::size_t FeatureHistogram::sample_bin(Rng& rng) const {
    const double u = rng.uniform();
    // first bin whose cumulative exceeds u; empty [c, c) intervals of
    // zero-mass bins can never contain u
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, bin_count() - 1);
}

void FeatureHistogram::rebuild_cumulative() {
    cumulative.resize(frequencies.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        acc += frequencies[i];
        cumulative[i] = acc;
    }
    if (!cumulative.empty()) cumulative.back() = 1.0;
}

void FeatureHistogram::validate() const {
    if (frequencies.empty() || bin_edges.size() != frequencies.size() + 1)
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "histogram needs B >= 1 bins and B+1 edges");
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
        if (!(bin_edges[i] < bin_edges[i + 1]))
            throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                        "bin edges must be strictly increasing");
    double total = 0.0;
    for (double f : frequencies) {
        if (f < 0.0)
            throw Error(ErrorKind::logic, ErrorCode::shape_mismatch, "negative bin frequency");
        total += f;
    }
    if (std::fabs(total - 1.0) > kFreqSumTol)
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "bin frequencies must sum to 1, got " + std::to_string(total));
}

const FeatureHistogram& HistogramSet::at(std::size_t feature_index) const {
    const auto it = lookup_.find(feature_index);
    if (it == lookup_.end())
        throw Error(ErrorKind::logic, ErrorCode::scope_mismatch,
                    "no histogram for feature " + std::to_string(feature_index));
    return histograms[it->second];
}

bool HistogramSet::covers(std::span<const std::size_t> features) const {
    for (std::size_t f : features)
        if (!lookup_.contains(f)) return false;
    return true;
}

std::vector<std::size_t> HistogramSet::feature_indices() const {
    std::vector<std::size_t> out;
    out.reserve(histograms.size());
    for (const auto& h : histograms) out.push_back(h.feature_index);
    return out;
}

void HistogramSet::rebuild_lookup() {
    lookup_.clear();
    for (std::size_t i = 0; i < histograms.size(); ++i) lookup_[histograms[i].feature_index] = i;
}

HistogramSet build_histograms(const Dataset& d, std::span<const std::size_t> features,
                              std::size_t bins, BinningMode mode, std::string_view role) {
    HistogramSet set;
    set.source_rows = d.size();
    set.source_role = std::string(role);
    set.histograms.reserve(features.size());
    for (std::size_t f : features) {
        if (f >= d.num_features())
            throw Error(ErrorKind::logic, ErrorCode::scope_mismatch,
                        "feature index " + std::to_string(f) + " out of range");
        set.histograms.push_back(FeatureHistogram::from_values(d.features.column(f), bins, f, mode));
    }
    set.rebuild_lookup();
    return set;
}

double sample_value(const FeatureHistogram& h, Rng& rng) {
    const std::size_t bin = h.sample_bin(rng);
    return rng.uniform(h.bin_edges[bin], h.bin_edges[bin + 1]);
}

double js_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty())
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "js_distance needs two equal-length non-empty vectors");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sp += p[i];
        sq += q[i];
    }
    if (sp <= 0.0 || sq <= 0.0)
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "js_distance inputs must have positive mass");
    double div = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] / sp;
        const double qi = q[i] / sq;
        const double mi = 0.5 * (pi + qi);
        if (pi > 0.0) div += 0.5 * pi * std::log(pi / mi);
        if (qi > 0.0) div += 0.5 * qi * std::log(qi / mi);
    }
    return std::sqrt(std::max(div, 0.0));
}

double jsd_between(const FeatureHistogram& h_ref, std::span<const double> values) {
    if (values.empty())
        throw Error(ErrorKind::logic, ErrorCode::empty_list, "jsd_between needs values");
    std::vector<double> counts(h_ref.bin_count(), 0.0);
    for (double v : values) counts[h_ref.locate_bin(v)] += 1.0;
    return js_distance(h_ref.frequencies, counts);
}

nlohmann::json to_json(const FeatureHistogram& h) {
    return {{"feature_index", h.feature_index},
            {"bin_edges", h.bin_edges},
            {"frequencies", h.frequencies}};
}

nlohmann::json to_json(const HistogramSet& set) {
    nlohmann::json j;
    j["source_rows"] = set.source_rows;
    j["source_role"] = set.source_role;
    j["histograms"] = nlohmann::json::array();
    for (const auto& h : set.histograms) j["histograms"].push_back(to_json(h));
    return j;
}

FeatureHistogram feature_histogram_from_json(const nlohmann::json& j) {
    FeatureHistogram h;
    h.feature_index = j.at("feature_index").get<std::size_t>();
    h.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    h.frequencies = j.at("frequencies").get<std::vector<double>>();
    h.rebuild_cumulative();
    h.validate();
    return h;
}

HistogramSet histogram_set_from_json(const nlohmann::json& j) {
    HistogramSet set;
    set.source_rows = j.at("source_rows").get<std::size_t>();
    set.source_role = j.at("source_role").get<std::string>();
    for (const auto& hj : j.at("histograms")) set.histograms.push_back(feature_histogram_from_json(hj));
    set.rebuild_lookup();
    return set;
}

}  // namespace rdsa
