#pragma once

// Central-difference gradient oracles for Classifier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rdsa/matrix.hpp"
#include "rdsa/model.hpp"
#include "rdsa/rng.hpp"

namespace gradcheck {

inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

// Max relative error between analytic parameter gradients and central
// differences of the batch loss, over `samples` randomly chosen parameters.
inline double max_param_rel_err(rdsa::Classifier& c, const rdsa::Matrix& x,
                                std::span<const int> labels, rdsa::Rng& rng,
                                std::size_t samples, double h = 1e-5) {
    const std::vector<double> analytic = c.parameter_gradients(x, labels);
    auto params = c.parameters_mutable();
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t i = static_cast<std::size_t>(rng.below(params.size()));
        const double saved = params[i];
        params[i] = saved + h;
        const double up = c.batch_loss(x, labels, /*training_mode=*/true);
        params[i] = saved - h;
        const double down = c.batch_loss(x, labels, /*training_mode=*/true);
        params[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

// Max relative error between input_gradient and central differences of the
// single-sample loss, over `dims` randomly chosen input dimensions.
inline double max_input_rel_err(const rdsa::Classifier& c, std::span<const double> x, int label,
                                rdsa::Rng& rng, std::size_t dims, double h = 1e-5) {
    const std::vector<double> analytic = c.input_gradient(x, label);
    std::vector<double> point(x.begin(), x.end());
    rdsa::Matrix row(1, point.size());
    const std::vector<int> labels{label};
    double worst = 0.0;
    for (std::size_t s = 0; s < dims; ++s) {
        const std::size_t j = static_cast<std::size_t>(rng.below(point.size()));
        const double saved = point[j];
        point[j] = saved + h;
        std::copy(point.begin(), point.end(), row.row(0).begin());
        const double up = c.batch_loss(row, labels, /*training_mode=*/false);
        point[j] = saved - h;
        std::copy(point.begin(), point.end(), row.row(0).begin());
        const double down = c.batch_loss(row, labels, /*training_mode=*/false);
        point[j] = saved;
        std::copy(point.begin(), point.end(), row.row(0).begin());
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[j], fd));
    }
    return worst;
}

}  // namespace gradcheck
