#include "rdsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rdsa/error.hpp"
#include "rdsa/kernels.hpp"

namespace rdsa {

double CorrelationMatrix::mean_abs_off_diagonal() const {
    const std::size_t f = values.rows();
    if (f < 2) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < f; ++j)
            if (i != j) total += std::fabs(values(i, j));
    return total / static_cast<double>(f * f - f);
}

double fooling_ratio(std::span<const AttackOutcome> outcomes) {
    if (outcomes.empty())
        throw Error(ErrorKind::logic, ErrorCode::empty_outcome_list,
                    "fooling ratio of an empty outcome list is undefined");
    std::size_t successes = 0;
    for (const AttackOutcome& o : outcomes) successes += o.succeeded ? 1 : 0;
    return static_cast<double>(successes) / static_cast<double>(outcomes.size());
}

double mean_feature_change(const Matrix& clean, const Matrix& adv) {
    if (clean.rows() != adv.rows() || clean.cols() != adv.cols())
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "mean_feature_change needs matrices of identical shape");
    if (clean.rows() == 0 || clean.cols() == 0)
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "mean_feature_change needs a non-empty matrix");
    const double total = kernels::sum_abs_diff(clean.data(), adv.data(), clean.size());
    return total / static_cast<double>(clean.rows() * clean.cols());
}

CorrelationMatrix correlation_matrix(const Matrix& d) {
    const std::size_t n = d.rows();
    const std::size_t f = d.cols();
    if (n < 2)
        throw Error(ErrorKind::logic, ErrorCode::too_few_samples,
                    "correlation needs at least 2 samples");

    // center the columns once; per-pair correlations are then plain dots
    Matrix centered = d.transposed();  // [F x N], rows contiguous per feature
    std::vector<double> norm(f, 0.0);
    CorrelationMatrix out;
    out.values = Matrix(f, f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
        auto row = centered.row(j);
        const double mean = kernels::sum(row.data(), n) / static_cast<double>(n);
        for (double& v : row) v -= mean;
        norm[j] = std::sqrt(kernels::dot(row.data(), row.data(), n));
        if (norm[j] == 0.0) out.degenerate.push_back(j);
    }
    for (std::size_t i = 0; i < f; ++i) {
        out.values(i, i) = 1.0;
        for (std::size_t j = i + 1; j < f; ++j) {
            double rho = 0.0;
            if (norm[i] > 0.0 && norm[j] > 0.0) {
                rho = kernels::dot(centered.row(i).data(), centered.row(j).data(), n) /
                      (norm[i] * norm[j]);
                rho = std::clamp(rho, -1.0, 1.0);
            }
            out.values(i, j) = rho;
            out.values(j, i) = rho;
        }
    }
    return out;
}

double correlation_diff(const CorrelationMatrix& a, const CorrelationMatrix& b) {
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
        throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                    "correlation matrices differ in shape");
    const std::size_t f = a.values.rows();
    const double total = kernels::sum_abs_diff(a.values.data(), b.values.data(), f * f);
    return total / static_cast<double>(f * f);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw Error(ErrorKind::logic, ErrorCode::length_mismatch,
                    "scores and labels differ in length");
    std::size_t n_pos = 0, n_neg = 0;
    for (int label : labels) (label == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw Error(ErrorKind::logic, ErrorCode::single_class,
                    "AUROC needs both classes present");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tied scores, then the Mann-Whitney U statistic
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                        static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auroc_macro_ovr(const Matrix& proba, std::span<const int> labels) {
    if (proba.rows() != labels.size())
        throw Error(ErrorKind::logic, ErrorCode::length_mismatch,
                    "probability rows and labels differ in length");
    const std::size_t k = proba.cols();
    double total = 0.0;
    std::size_t classes_present = 0;
    std::vector<int> binary(labels.size());
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t pos = 0;
        for (std::size_t r = 0; r < labels.size(); ++r) {
            binary[r] = labels[r] == static_cast<int>(c) ? 1 : 0;
            pos += static_cast<std::size_t>(binary[r]);
        }
        if (pos == 0 || pos == labels.size()) continue;  // class absent, skip
        total += auroc(proba.column(c), binary);
        ++classes_present;
    }
    if (classes_present == 0)
        throw Error(ErrorKind::logic, ErrorCode::single_class,
                    "AUROC needs both classes present");
    return total / static_cast<double>(classes_present);
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size())
        throw Error(ErrorKind::logic, ErrorCode::length_mismatch,
                    "prediction and label vectors differ in length");
    if (predicted.empty())
        throw Error(ErrorKind::logic, ErrorCode::length_mismatch, "accuracy of nothing");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        correct += predicted[i] == labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

nlohmann::json to_json(const MetricsReport& r) {
    return {{"fooling_ratio", r.fooling_ratio},
            {"fr_std", r.fr_std},
            {"mean_feature_change", r.mean_feature_change},
            {"per_feature_jsd", r.per_feature_jsd},
            {"mean_jsd", r.mean_jsd},
            {"correlation_diff", r.correlation_diff},
            {"correlation_diff_scope", r.correlation_diff_scope},
            {"accuracy", r.accuracy},
            {"auroc", r.auroc},
            {"attacked", r.attacked},
            {"successes", r.successes}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.fooling_ratio = j.at("fooling_ratio").get<double>();
    r.fr_std = j.value("fr_std", 0.0);
    r.mean_feature_change = j.at("mean_feature_change").get<double>();
    r.per_feature_jsd = j.value("per_feature_jsd", std::vector<double>{});
    r.mean_jsd = j.value("mean_jsd", 0.0);
    r.correlation_diff = j.value("correlation_diff", 0.0);
    r.correlation_diff_scope = j.value("correlation_diff_scope", 0.0);
    r.accuracy = j.value("accuracy", 0.0);
    r.auroc = j.value("auroc", 0.0);
    r.attacked = j.value("attacked", 0.0);
    r.successes = j.value("successes", 0.0);
    return r;
}

}  // namespace rdsa
