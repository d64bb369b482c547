#include "rdsa/kernels.hpp"

// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64; the dispatcher only routes here after a runtime
// CPU check. Reductions use a single vector accumulator, so results can
// differ from the scalar reference in the last few ulps (association order);
// the equivalence tests bound that difference.

#if defined(__x86_64__) || defined(_M_X64)
#define RDSA_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define RDSA_HAVE_AVX2_TU 0
#endif

#include <cmath>

namespace rdsa::kernels::avx2 {

#if RDSA_HAVE_AVX2_TU

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_fmadd_pd(va, vb, acc);
    }
    double result = hsum(acc);
    for (; i < n; ++i) result += a[i] * b[i];
    return result;
}

double sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double result = hsum(acc);
    for (; i < n; ++i) result += a[i];
    return result;
}

double sum_abs_diff(const double* a, const double* b, std::size_t n) {
    // clear the sign bit to take |x|
    const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_and_pd(d, abs_mask));
    }
    double result = hsum(acc);
    for (; i < n; ++i) result += std::fabs(a[i] - b[i]);
    return result;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* w, std::size_t out_dim, std::size_t in_dim,
            const double* x, const double* bias, double* y) {
    for (std::size_t i = 0; i < out_dim; ++i) {
        const double* row = w + i * in_dim;
        double acc = dot(row, x, in_dim);
        y[i] = bias ? acc + bias[i] : acc;
    }
}

void matvec_t(const double* w, std::size_t out_dim, std::size_t in_dim,
              const double* dy, double* dx) {
    std::size_t j = 0;
    for (; j + 4 <= in_dim; j += 4) _mm256_storeu_pd(dx + j, _mm256_setzero_pd());
    for (; j < in_dim; ++j) dx[j] = 0.0;
    for (std::size_t i = 0; i < out_dim; ++i) axpy(dy[i], w + i * in_dim, dx, in_dim);
}

void rank1_accum(double* w, std::size_t out_dim, std::size_t in_dim,
                 const double* dy, const double* x) {
    for (std::size_t i = 0; i < out_dim; ++i) axpy(dy[i], x, w + i * in_dim, in_dim);
}

void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double bc1, double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_fmadd_pd(v1mb1, vg, _mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)));
        __m256d vv = _mm256_fmadd_pd(v1mb2, _mm256_mul_pd(vg, vg),
                                     _mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d m_hat = _mm256_div_pd(vm, vbc1);
        __m256d v_hat = _mm256_div_pd(vv, vbc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps);
        __m256d vp = _mm256_loadu_pd(p + i);
        vp = _mm256_sub_pd(vp, _mm256_div_pd(_mm256_mul_pd(vlr, m_hat), denom));
        _mm256_storeu_pd(p + i, vp);
    }
    for (; i < n; ++i) {
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
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_fmadd_pd(v1mb1, vg, _mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)));
        __m256d vv = _mm256_fmadd_pd(v1mb2, _mm256_mul_pd(vg, vg),
                                     _mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d m_hat = _mm256_div_pd(vm, vbc1);
        __m256d g_hat = _mm256_div_pd(vg, vbc1);
        __m256d look = _mm256_fmadd_pd(vb1, m_hat, _mm256_mul_pd(v1mb1, g_hat));
        __m256d v_hat = _mm256_div_pd(vv, vbc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps);
        __m256d vp = _mm256_loadu_pd(p + i);
        vp = _mm256_sub_pd(vp, _mm256_div_pd(_mm256_mul_pd(vlr, look), denom));
        _mm256_storeu_pd(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double g_hat = g[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= lr * (beta1 * m_hat + (1.0 - beta1) * g_hat) / (std::sqrt(v_hat) + eps);
    }
}

#endif  // RDSA_HAVE_AVX2_TU

}  // namespace rdsa::kernels::avx2
