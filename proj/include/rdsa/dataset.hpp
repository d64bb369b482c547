#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rdsa/matrix.hpp"

namespace rdsa {

struct FeatureMeta {
    std::string name;
    bool continuous = true;
    std::size_t index = 0;

    friend bool operator==(const FeatureMeta&, const FeatureMeta&) = default;
};

// Tabular classification data. Immutable by convention after construction;
// operations return new datasets.
struct Dataset {
    Matrix features;               // [N x F]
    std::vector<int> labels;       // class indices in [0, num_classes)
    std::vector<FeatureMeta> meta; // one entry per feature column
    int num_classes = 2;

    std::size_t size() const { return features.rows(); }
    std::size_t num_features() const { return features.cols(); }
    std::vector<std::size_t> continuous_indices() const;

    // Checks the structural invariants (finite features, labels in range,
    // meta width and indices); throws Error(logic) on violation.
    void validate() const;
};

struct SplitBundle {
    Dataset train;
    Dataset validation;
    Dataset test;
};

struct ZScoreStats {
    std::vector<double> mean;            // per feature (0 where not applied)
    std::vector<double> stddev;          // sample std from the stats source
    std::vector<bool> applied;           // true where the feature was rescaled
    std::vector<std::size_t> degenerate; // continuous features with stddev == 0
};

// Reads a CSV with a header row. Every schema name and the label column must
// appear in the header; extra header columns are an error. Cells must be
// numeric; labels must be non-negative integers.
Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureMeta>& schema,
                 const std::string& label_column);

// Same, with the schema taken from the header (all columns except the label).
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

void write_csv(const Dataset& d, const std::filesystem::path& path);

// Maps each continuous feature to (x - mean) / stddev with the statistics
// computed on stats_source (sample standard deviation). Features whose
// stddev is zero pass through unchanged and are reported in `degenerate`.
std::pair<Dataset, ZScoreStats> zscore_normalize(const Dataset& d, const Dataset& stats_source);

// Undoes zscore_normalize for the features it touched.
Dataset zscore_invert(const Dataset& d, const ZScoreStats& stats);

// Marks a feature continuous iff it has at least `threshold` distinct values.
std::vector<FeatureMeta> detect_continuous(const Dataset& d, std::size_t threshold);

// Uniform sampling without replacement; deterministic for a given seed.
// fraction must lie in (0, 1] and the result must have at least one row.
Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed);

// Per-class multivariate Gaussian with the given correlation structure
// (symmetric PSD, unit diagonal) and a class-dependent mean shift: class c
// is centered at c * class_shift. Labels are assigned round-robin, so class
// counts are balanced. All features are continuous.
Dataset synthesize_correlated(std::size_t n, std::size_t f, int k, const Matrix& correlation,
                              const std::vector<double>& class_shift, std::uint64_t seed);

// Shuffles rows with the given seed, then partitions into train/validation/
// test by the given fractions (test gets the remainder).
SplitBundle split_dataset(const Dataset& d, double train_fraction, double validation_fraction,
                          std::uint64_t seed);

// Convenience correlation builders for synthetic specs.
Matrix identity_correlation(std::size_t f);
Matrix equicorrelation(std::size_t f, double rho);

}  // namespace rdsa
