#include "rdsa/kernels.hpp"

#include <cmath>

// Scalar reference kernels. These are the semantics the SIMD variants are
// tested against.

namespace rdsa::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double sum_abs_diff(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* w, std::size_t out_dim, std::size_t in_dim,
            const double* x, const double* bias, double* y) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double* row = w + i * in_dim;
        double acc = bias ? bias[i] : 0.0;
        for (std::size_t j = 0; j < in_dim; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void matvec_t(const double* w, std::size_t out_dim, std::size_t in_dim,
              const double* dy, double* dx) {
    for (std::size_t j = 0; j < in_dim; ++j) dx[j] = 0.0;
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double* row = w + i * in_dim;
        const double d = dy[i];
        for (std::size_t j = 0; j < in_dim; ++j) dx[j] += row[j] * d;
    }
}

void rank1_accum(double* w, std::size_t out_dim, std::size_t in_dim,
                 const double* dy, const double* x) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        double* row = w + i * in_dim;
        const double d = dy[i];
        for (std::size_t j = 0; j < in_dim; ++j) row[j] += d * x[j];
    }
}

void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void nadam_step(double* p, double* m, double* v, const double* g, std::size_t n,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double g_hat = g[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= lr * (beta1 * m_hat + (1.0 - beta1) * g_hat) / (std::sqrt(v_hat) + eps);
    }
}

}  // namespace rdsa::kernels::scalar
