#include "rdsa/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

#include "rdsa/error.hpp"

namespace rdsa::kernels {

// Per-variant declarations; definitions live in kernels_scalar.cpp and
// kernels_avx2.cpp.
#define RDSA_KERNEL_DECLS(ns)                                                              \
    namespace ns {                                                                         \
    double dot(const double*, const double*, std::size_t);                                 \
    double sum(const double*, std::size_t);                                                \
    double sum_abs_diff(const double*, const double*, std::size_t);                        \
    void axpy(double, const double*, double*, std::size_t);                                \
    void matvec(const double*, std::size_t, std::size_t, const double*, const double*,    \
                double*);                                                                  \
    void matvec_t(const double*, std::size_t, std::size_t, const double*, double*);        \
    void rank1_accum(double*, std::size_t, std::size_t, const double*, const double*);     \
    void adam_step(double*, double*, double*, const double*, std::size_t, double, double,  \
                   double, double, double, double);                                        \
    void nadam_step(double*, double*, double*, const double*, std::size_t, double, double, \
                    double, double, double, double);                                       \
    }

RDSA_KERNEL_DECLS(scalar)
RDSA_KERNEL_DECLS(avx2)
#undef RDSA_KERNEL_DECLS

namespace {

struct Ops {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sum_abs_diff)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*matvec)(const double*, std::size_t, std::size_t, const double*, const double*,
                   double*);
    void (*matvec_t)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*rank1_accum)(double*, std::size_t, std::size_t, const double*, const double*);
    void (*adam_step)(double*, double*, double*, const double*, std::size_t, double, double,
                      double, double, double, double);
    void (*nadam_step)(double*, double*, double*, const double*, std::size_t, double, double,
                       double, double, double, double);
};

constexpr Ops kScalarOps = {
    scalar::dot,    scalar::sum,         scalar::sum_abs_diff,
    scalar::axpy,   scalar::matvec,      scalar::matvec_t,
    scalar::rank1_accum, scalar::adam_step, scalar::nadam_step,
};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Ops kAvx2Ops = {
    avx2::dot,    avx2::sum,         avx2::sum_abs_diff,
    avx2::axpy,   avx2::matvec,      avx2::matvec_t,
    avx2::rank1_accum, avx2::adam_step, avx2::nadam_step,
};
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<const Ops*> g_ops{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};
std::once_flag g_init;

void install(Backend b) {
    switch (b) {
        case Backend::scalar:
            g_ops.store(&kScalarOps, std::memory_order_release);
            break;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            g_ops.store(&kAvx2Ops, std::memory_order_release);
            break;
#else
            g_ops.store(&kScalarOps, std::memory_order_release);
            break;
#endif
    }
    g_backend.store(b, std::memory_order_release);
}

void init_from_env() {
    Backend pick = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("RDSA_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) {
            pick = Backend::scalar;
        } else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) {
            pick = Backend::avx2;
        }
        // "auto" or anything unrecognized keeps the detected default
    }
    install(pick);
}

const Ops& ops() {
    std::call_once(g_init, init_from_env);
    return *g_ops.load(std::memory_order_acquire);
}

}  // namespace

Backend active_backend() {
    ops();
    return g_backend.load(std::memory_order_acquire);
}

bool backend_supported(Backend b) {
    return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

void set_backend(Backend b) {
    if (!backend_supported(b)) {
        throw Error(ErrorKind::logic, ErrorCode::bad_config,
                    std::string("kernel backend not supported on this CPU: ") + backend_name(b));
    }
    std::call_once(g_init, init_from_env);
    install(b);
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "?";
}

double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
double sum(const double* a, std::size_t n) { return ops().sum(a, n); }
double sum_abs_diff(const double* a, const double* b, std::size_t n) {
    return ops().sum_abs_diff(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    ops().axpy(alpha, x, y, n);
}
void matvec(const double* w, std::size_t out_dim, std::size_t in_dim, const double* x,
            const double* bias, double* y) {
    ops().matvec(w, out_dim, in_dim, x, bias, y);
}
void matvec_t(const double* w, std::size_t out_dim, std::size_t in_dim, const double* dy,
              double* dx) {
    ops().matvec_t(w, out_dim, in_dim, dy, dx);
}
void rank1_accum(double* w, std::size_t out_dim, std::size_t in_dim, const double* dy,
                 const double* x) {
    ops().rank1_accum(w, out_dim, in_dim, dy, x);
}
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
               double beta1, double beta2, double eps, double bc1, double bc2) {
    ops().adam_step(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}
void nadam_step(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                double beta1, double beta2, double eps, double bc1, double bc2) {
    ops().nadam_step(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

}  // namespace rdsa::kernels
