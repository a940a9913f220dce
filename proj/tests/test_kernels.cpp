#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bico/kernels.hpp"

using bico::kernels::KernelTable;

namespace {

std::vector<double> rnd(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

void close(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
}

}  // namespace

TEST_CASE("scalar and AVX2 kernels agree, including ragged tails") {
    const KernelTable& s = bico::kernels::scalar_table();
    const KernelTable* v = bico::kernels::avx2_table();
    if (!v) {
        MESSAGE("AVX2 variant unavailable on this machine; only the scalar table is exercised");
        v = &s;
    }
    std::mt19937_64 rng(3);
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 64u, 101u}) {
        CAPTURE(n);
        const auto a = rnd(n, rng), b = rnd(n, rng);
        CHECK(v->dot(a.data(), b.data(), n) == doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-13));

        auto y1 = rnd(n, rng);
        auto y2 = y1;
        s.axpy(0.7, a.data(), y1.data(), n);
        v->axpy(0.7, a.data(), y2.data(), n);
        close(y1, y2);

        std::vector<double> h1(n), h2(n);
        s.hadamard(a.data(), b.data(), h1.data(), n);
        v->hadamard(a.data(), b.data(), h2.data(), n);
        close(h1, h2);

        const auto ca = rnd(2 * n, rng), cb = rnd(2 * n, rng);
        std::vector<double> c1(2 * n), c2(2 * n);
        s.complex_mul(ca.data(), cb.data(), c1.data(), n);
        v->complex_mul(ca.data(), cb.data(), c2.data(), n);
        close(c1, c2);

        auto acc1 = rnd(2 * n, rng);
        auto acc2 = acc1;
        s.complex_mul_conj_acc(ca.data(), cb.data(), acc1.data(), n);
        v->complex_mul_conj_acc(ca.data(), cb.data(), acc2.data(), n);
        close(acc1, acc2);

        for (std::size_t rows : {1u, 3u, 6u}) {
            const auto w = rnd(rows * n, rng), bias = rnd(rows, rng), g = rnd(rows, rng);
            std::vector<double> g1(rows), g2(rows);
            s.gemv(w.data(), a.data(), bias.data(), g1.data(), rows, n);
            v->gemv(w.data(), a.data(), bias.data(), g2.data(), rows, n);
            close(g1, g2);
            s.gemv(w.data(), a.data(), nullptr, g1.data(), rows, n);
            v->gemv(w.data(), a.data(), nullptr, g2.data(), rows, n);
            close(g1, g2);

            auto t1 = rnd(n, rng);
            auto t2 = t1;
            s.gemv_t_acc(w.data(), g.data(), t1.data(), rows, n);
            v->gemv_t_acc(w.data(), g.data(), t2.data(), rows, n);
            close(t1, t2);

            auto w1 = w, w2 = w;
            s.ger_acc(g.data(), a.data(), w1.data(), rows, n);
            v->ger_acc(g.data(), a.data(), w2.data(), rows, n);
            close(w1, w2);
        }
    }
}

TEST_CASE("scalar kernels against direct loops") {
    const KernelTable& s = bico::kernels::scalar_table();
    const std::vector<double> a{1, 2}, b{3, 4};
    std::vector<double> out(2);
    // (1+2i)(3+4i) stored as [re | im] with half = 1
    s.complex_mul(a.data(), b.data(), out.data(), 1);
    CHECK(out[0] == -5.0);
    CHECK(out[1] == 10.0);
    CHECK(s.dot(a.data(), b.data(), 2) == 11.0);
    const std::vector<double> w{1, 2, 3, 4, 5, 6};  // 2 x 3
    const std::vector<double> x{1, 0, -1}, bias{0.5, -0.5};
    std::vector<double> y(2);
    s.gemv(w.data(), x.data(), bias.data(), y.data(), 2, 3);
    CHECK(y[0] == -1.5);
    CHECK(y[1] == -2.5);
}

TEST_CASE("active table is one of the known variants") {
    const std::string name = bico::kernels::active().name;
    CHECK((name == "scalar" || name == "avx2"));
}
