#pragma once

#include <cstddef>
#include <span>

namespace rdsa::kernels {

// The arithmetic inner loops (dense-layer algebra, reductions, optimizer
// updates) exist in two variants: a scalar reference implementation and an
// AVX2+FMA one. The active variant is chosen once at startup — AVX2 when the
// CPU supports it, overridable via the RDSA_KERNELS environment variable
// ("scalar", "avx2", "auto") or set_backend(). Both variants are
// equivalence-tested against each other.
enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_supported(Backend b);
void set_backend(Backend b);  // throws rdsa::Error(logic) if unsupported on this CPU
const char* backend_name(Backend b);

// -- reductions ---------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_abs_diff(const double* a, const double* b, std::size_t n);

// -- vector / dense-layer ops -------------------------------------------

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y[i] = dot(w[i,:], x) + bias[i]; w row-major [out_dim x in_dim].
// bias may be null (treated as zero).
void matvec(const double* w, std::size_t out_dim, std::size_t in_dim,
            const double* x, const double* bias, double* y);

// dx[j] = sum_i w[i,j] * dy[i]  (transposed product, used in backprop)
void matvec_t(const double* w, std::size_t out_dim, std::size_t in_dim,
              const double* dy, double* dx);

// w[i,j] += dy[i] * x[j]  (rank-1 gradient accumulation)
void rank1_accum(double* w, std::size_t out_dim, std::size_t in_dim,
                 const double* dy, const double* x);

// -- optimizer updates ---------------------------------------------------
// bc1 = 1 - beta1^t, bc2 = 1 - beta2^t (bias-correction terms at step t).

void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double bc1, double bc2);

// Adam with Nesterov correction: the lookahead moment
// beta1*m_hat + (1-beta1)*g/bc1 replaces m_hat in the update.
void nadam_step(double* p, double* m, double* v, const double* g, std::size_t n,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2);

// -- span conveniences ----------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    return dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return sum(a.data(), a.size()); }
inline double sum_abs_diff(std::span<const double> a, std::span<const double> b) {
    return sum_abs_diff(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace rdsa::kernels
