#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "rdsa/kernels.hpp"
#include "rdsa/rng.hpp"

using namespace rdsa;
namespace k = rdsa::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool close(double a, double b, double scale) {
    return std::fabs(a - b) <= 1e-12 * (scale + 1.0);
}

}  // namespace

TEST_CASE("backend dispatch and override") {
    CHECK(k::backend_supported(k::Backend::scalar));
    const k::Backend initial = k::active_backend();
    k::set_backend(k::Backend::scalar);
    CHECK(k::active_backend() == k::Backend::scalar);
    if (k::backend_supported(k::Backend::avx2)) {
        k::set_backend(k::Backend::avx2);
        CHECK(k::active_backend() == k::Backend::avx2);
    } else {
        CHECK_THROWS(k::set_backend(k::Backend::avx2));
    }
    k::set_backend(initial);
}

TEST_CASE("scalar kernels: reference semantics") {
    k::set_backend(k::Backend::scalar);
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, -5.0, 6.0};
    CHECK(k::dot(a, b, 3) == doctest::Approx(1.0 * 4 - 2 * 5 + 3 * 6));
    CHECK(k::sum(a, 3) == doctest::Approx(6.0));
    CHECK(k::sum_abs_diff(a, b, 3) == doctest::Approx(3.0 + 7.0 + 3.0));

    double y[] = {1.0, 1.0, 1.0};
    k::axpy(2.0, a, y, 3);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 5.0);
    CHECK(y[2] == 7.0);

    // W = [[1,0,2],[0,3,0]], x = [1,2,3], bias = [10,20]
    const double w[] = {1, 0, 2, 0, 3, 0};
    const double x[] = {1, 2, 3};
    const double bias[] = {10, 20};
    double out[2];
    k::matvec(w, 2, 3, x, bias, out);
    CHECK(out[0] == 17.0);
    CHECK(out[1] == 26.0);

    const double dy[] = {1.0, -1.0};
    double dx[3];
    k::matvec_t(w, 2, 3, dy, dx);
    CHECK(dx[0] == 1.0);
    CHECK(dx[1] == -3.0);
    CHECK(dx[2] == 2.0);

    double w2[6] = {0, 0, 0, 0, 0, 0};
    k::rank1_accum(w2, 2, 3, dy, x);
    CHECK(w2[0] == 1.0);
    CHECK(w2[2] == 3.0);
    CHECK(w2[4] == -2.0);
}

TEST_CASE("scalar vs avx2 equivalence on all kernels") {
    if (!k::backend_supported(k::Backend::avx2)) {
        MESSAGE("AVX2 not available, skipping equivalence checks");
        return;
    }
    Rng rng(20240517);
    // sizes straddle the vector width to exercise the remainder loops
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 33u, 64u, 67u, 257u}) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);

        k::set_backend(k::Backend::scalar);
        const double dot_s = k::dot(a.data(), b.data(), n);
        const double sum_s = k::sum(a.data(), n);
        const double sad_s = k::sum_abs_diff(a.data(), b.data(), n);
        k::set_backend(k::Backend::avx2);
        const double dot_v = k::dot(a.data(), b.data(), n);
        const double sum_v = k::sum(a.data(), n);
        const double sad_v = k::sum_abs_diff(a.data(), b.data(), n);

        CHECK(close(dot_s, dot_v, static_cast<double>(n)));
        CHECK(close(sum_s, sum_v, static_cast<double>(n)));
        CHECK(close(sad_s, sad_v, static_cast<double>(n)));

        auto y_s = random_vec(rng, n);
        auto y_v = y_s;
        k::set_backend(k::Backend::scalar);
        k::axpy(0.37, a.data(), y_s.data(), n);
        k::set_backend(k::Backend::avx2);
        k::axpy(0.37, a.data(), y_v.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(y_s[i], y_v[i], 1.0));
    }

    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1},
                              {3, 5},
                              {8, 8},
                              {5, 17},
                              {13, 64}}) {
        const auto w = random_vec(rng, rows * cols);
        const auto x = random_vec(rng, cols);
        const auto bias = random_vec(rng, rows);
        const auto dy = random_vec(rng, rows);

        std::vector<double> y_s(rows), y_v(rows), dx_s(cols), dx_v(cols);
        auto w_s = w, w_v = w;
        k::set_backend(k::Backend::scalar);
        k::matvec(w.data(), rows, cols, x.data(), bias.data(), y_s.data());
        k::matvec_t(w.data(), rows, cols, dy.data(), dx_s.data());
        k::rank1_accum(w_s.data(), rows, cols, dy.data(), x.data());
        k::set_backend(k::Backend::avx2);
        k::matvec(w.data(), rows, cols, x.data(), bias.data(), y_v.data());
        k::matvec_t(w.data(), rows, cols, dy.data(), dx_v.data());
        k::rank1_accum(w_v.data(), rows, cols, dy.data(), x.data());

        for (std::size_t i = 0; i < rows; ++i) CHECK(close(y_s[i], y_v[i], static_cast<double>(cols)));
        for (std::size_t j = 0; j < cols; ++j) CHECK(close(dx_s[j], dx_v[j], static_cast<double>(rows)));
        for (std::size_t i = 0; i < rows * cols; ++i) CHECK(close(w_s[i], w_v[i], 1.0));
    }

    // optimizer updates keep state (m, v, p); run several steps on both paths
    for (std::size_t n : {1u, 6u, 19u, 128u}) {
        auto p_s = random_vec(rng, n), m_s = std::vector<double>(n, 0.0),
             v_s = std::vector<double>(n, 0.0);
        auto p_v = p_s, m_v = m_s, v_v = v_s;
        for (int t = 1; t <= 5; ++t) {
            const auto g = random_vec(rng, n);
            const double bc1 = 1.0 - std::pow(0.9, t);
            const double bc2 = 1.0 - std::pow(0.999, t);
            k::set_backend(k::Backend::scalar);
            k::adam_step(p_s.data(), m_s.data(), v_s.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                         bc1, bc2);
            k::set_backend(k::Backend::avx2);
            k::adam_step(p_v.data(), m_v.data(), v_v.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                         bc1, bc2);
        }
        for (std::size_t i = 0; i < n; ++i) CHECK(close(p_s[i], p_v[i], 1.0));

        auto q_s = random_vec(rng, n), mm_s = std::vector<double>(n, 0.0),
             vv_s = std::vector<double>(n, 0.0);
        auto q_v = q_s, mm_v = mm_s, vv_v = vv_s;
        for (int t = 1; t <= 5; ++t) {
            const auto g = random_vec(rng, n);
            const double bc1 = 1.0 - std::pow(0.9, t);
            const double bc2 = 1.0 - std::pow(0.999, t);
            k::set_backend(k::Backend::scalar);
            k::nadam_step(q_s.data(), mm_s.data(), vv_s.data(), g.data(), n, 1e-3, 0.9, 0.999,
                          1e-8, bc1, bc2);
            k::set_backend(k::Backend::avx2);
            k::nadam_step(q_v.data(), mm_v.data(), vv_v.data(), g.data(), n, 1e-3, 0.9, 0.999,
                          1e-8, bc1, bc2);
        }
        for (std::size_t i = 0; i < n; ++i) CHECK(close(q_s[i], q_v[i], 1.0));
    }
    k::set_backend(k::Backend::avx2);
}

TEST_CASE("adam step formula at t=1") {
    k::set_backend(k::Backend::scalar);
    double p = 1.0, m = 0.0, v = 0.0;
    const double g = 0.5;
    k::adam_step(&p, &m, &v, &g, 1, 0.1, 0.9, 0.999, 1e-8, 1.0 - 0.9, 1.0 - 0.999);
    // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    CHECK(p == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
    CHECK(m == doctest::Approx(0.05));
    CHECK(v == doctest::Approx(0.00025));
}

TEST_CASE("rng determinism and distribution basics") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng rng(123);
    double mean = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) mean += rng.gaussian();
    mean /= n;
    CHECK(std::fabs(mean) < 0.01);  // ~4 sigma of 1/sqrt(n)

    Rng u(5);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        CHECK(u.below(10) < 10);
    }

    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}
