#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rdsa/attack.hpp"
#include "rdsa/dataset.hpp"
#include "rdsa/histogram.hpp"
#include "rdsa/metrics.hpp"
#include "rdsa/model.hpp"

#include "json.hpp"

namespace rdsa {

struct CsvSource {
    std::filesystem::path path;
    std::string label_column;
};

struct SyntheticSource {
    std::size_t n = 0;
    std::size_t f = 0;
    int k = 2;
    Matrix correlation;
    std::vector<double> class_shift;
    std::uint64_t seed = 0;
};

struct DataSpec {
    std::variant<CsvSource, SyntheticSource> source;
    double train_fraction = 0.6;
    double validation_fraction = 0.2;  // test gets the remainder
    std::uint64_t split_seed = 0;
    bool zscore = true;
    std::size_t continuity_threshold = 20;
};

struct PreparedData {
    SplitBundle splits;
    ZScoreStats stats;
    std::vector<std::size_t> continuous;  // default shuffle scope
    std::string train_fingerprint;
    std::string test_fingerprint;
};

// Loads (or synthesizes) the data, detects continuous features, splits, and
// z-score normalizes continuous features with train-split statistics.
PreparedData prepare_data(const DataSpec& spec);

enum class PersistAdversaries { none, first_run, all };

struct AttackSweepSpec {
    DataSpec data;
    ModelConfig model;
    std::vector<std::size_t> n_vars_grid;
    std::size_t max_attempts = 100;
    std::size_t bins = 1000;
    BinningMode binning = BinningMode::equal_width;
    std::size_t runs = 10;
    std::uint64_t seed_base = 0;
    bool reselect_vars_per_attempt = false;
    std::optional<std::vector<std::size_t>> scope_override;
    std::size_t workers = 1;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::filesystem::path> reuse_checkpoint;
    PersistAdversaries persist_adversaries = PersistAdversaries::first_run;
};

struct SweepCell {
    std::size_t n_vars = 0;
    std::vector<MetricsReport> per_run;
    MetricsReport mean;
    MetricsReport rms;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    TrainingLog training_log;
    std::string test_fingerprint_before;
    std::string test_fingerprint_after;
};

// Attack-evaluation workflow: preprocess, train (or load) the model, build
// histograms on the test split, then attack the full test set for every
// (n_vars, run) cell and compute the metric suite. All stage artifacts are
// persisted under out_dir when it is set.
SweepResult run_attack_pipeline(const AttackSweepSpec& spec);

struct NoAugmentation {};

struct RdsaStrategy {
    std::size_t n_vars = 1;
    std::size_t max_attempts = 100;
    std::size_t bins = 1000;
    BinningMode binning = BinningMode::equal_width;
    bool reselect_vars_per_attempt = false;
};

struct GradientStrategy {
    GradientAttackConfig cfg;
};

using AugmentationStrategy = std::variant<NoAugmentation, RdsaStrategy, GradientStrategy>;

std::string strategy_name(const AugmentationStrategy& s);

struct AugmentationSpec {
    DataSpec data;
    ModelConfig model;
    std::optional<double> reduction_fraction;  // exactly one of fraction / target_size
    std::optional<std::size_t> target_size;
    std::vector<AugmentationStrategy> strategies;
    std::size_t repetitions = 50;
    std::uint64_t seed_base = 42;
    std::optional<std::vector<std::size_t>> scope_override;
    std::size_t workers = 1;
    std::optional<std::filesystem::path> out_dir;
};

struct StrategyCell {
    std::string name;
    std::vector<MetricsReport> per_rep;
    MetricsReport mean;
    MetricsReport rms;
};

struct AugmentationResult {
    std::vector<StrategyCell> cells;
    std::string test_fingerprint_before;
    std::string test_fingerprint_after;
};

// Data-augmentation workflow: per repetition, subsample the training split
// (seed lineage derive(seed_base, rep)), train a data-starved model, generate
// one adversary per reduced-set row with the configured strategy, merge them
// (true labels) to double the reduced set, reset weights, retrain, and
// evaluate on the untouched test split. Aggregates are mean +- RMS over
// repetitions.
AugmentationResult run_augmentation_pipeline(const AugmentationSpec& spec);

// Arithmetic mean and RMS deviation about the mean, field by field. The
// mean report's fr_std is filled with the fooling-ratio RMS.
std::pair<MetricsReport, MetricsReport> aggregate(std::span<const MetricsReport> reports);

// Accuracy and AUROC (macro one-vs-rest for multi-class) of a classifier on
// a dataset.
std::pair<double, double> evaluate_model(const Classifier& model, const Dataset& d);

nlohmann::json to_json(const DataSpec& spec);
nlohmann::json to_json(const AttackSweepSpec& spec);
nlohmann::json to_json(const AugmentationSpec& spec);

// Aggregate tables in the exact byte layout the pipelines persist; the
// report command regenerates them from per-run metric files.
std::string render_attack_aggregate_csv(const SweepResult& result);
std::string render_augment_aggregate_csv(const AugmentationResult& result,
                                         std::size_t repetitions);

}  // namespace rdsa
