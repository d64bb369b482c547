#pragma once

#include <span>
#include <vector>

#include "rdsa/attack.hpp"
#include "rdsa/matrix.hpp"

#include "json.hpp"

namespace rdsa {

struct CorrelationMatrix {
    Matrix values;                        // F x F Pearson correlations
    std::vector<std::size_t> degenerate;  // zero-variance features (diag 1, off-diag 0)

    double mean_abs_off_diagonal() const;
};

// Every evaluation quantity for one attack or retraining run.
struct MetricsReport {
    double fooling_ratio = 0.0;
    double fr_std = 0.0;  // filled on aggregates over runs
    double mean_feature_change = 0.0;
    std::vector<double> per_feature_jsd;
    double mean_jsd = 0.0;
    double correlation_diff = 0.0;        // over all features
    double correlation_diff_scope = 0.0;  // over the shuffled scope only
    double accuracy = 0.0;
    double auroc = 0.0;
    double attacked = 0.0;   // correctly classified inputs that were attacked
    double successes = 0.0;  // attacks that flipped the label
};

// successes / total over outcomes of correctly classified inputs.
double fooling_ratio(std::span<const AttackOutcome> outcomes);

// (1/N) sum_i (1/F) sum_j |clean_ij - adv_ij|
double mean_feature_change(const Matrix& clean, const Matrix& adv);

// Pearson correlation; zero-variance features are flagged and get an
// identity row/column. Needs at least two rows.
CorrelationMatrix correlation_matrix(const Matrix& d);

// (1/F^2) sum_ij |A - B|_ij, diagonal included.
double correlation_diff(const CorrelationMatrix& a, const CorrelationMatrix& b);

// Probability that a random positive outscores a random negative, ties
// counted 1/2 (Mann-Whitney rank form). labels are 0/1; both classes must
// be present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Unweighted one-vs-rest macro average over classes present in labels.
// proba is [N x K].
double auroc_macro_ovr(const Matrix& proba, std::span<const int> labels);

double accuracy(std::span<const int> predicted, std::span<const int> labels);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

}  // namespace rdsa
