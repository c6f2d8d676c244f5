#include <doctest.h>

#include <array>
#include <vector>

#include "osm/kernels.hpp"
#include "osm/rng.hpp"

using namespace osm;

namespace {

std::vector<double> random_buf(Rng& rng, int n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("identity times matrix is the matrix") {
    std::vector<double> id = {1, 0, 0, 1};
    std::vector<double> m = {3.5, -1.25, 0.75, 9.0};
    std::vector<double> c(4);
    kernels::matmul_nn(id.data(), m.data(), c.data(), 2, 2, 2, false);
    CHECK(c == m);
}

TEST_CASE("hand-computed product") {
    std::vector<double> a = {1, 2, 3, 4};  // 2x2
    std::vector<double> b = {1, 1};        // 2x1
    std::vector<double> c(2);
    kernels::matmul_nn(a.data(), b.data(), c.data(), 2, 2, 1, false);
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 7.0);
}

TEST_CASE("parallel kernels match serial bitwise") {
    Rng rng(11);
    const std::vector<std::array<int, 3>> shapes = {{3, 4, 5}, {17, 9, 23}, {64, 64, 64},
                                                    {130, 70, 40}};
    for (auto [m, k, n] : shapes) {
        auto a = random_buf(rng, m * k);
        auto b_nn = random_buf(rng, k * n);
        auto b_nt = random_buf(rng, n * k);
        auto a_tn = random_buf(rng, k * m);

        std::vector<double> serial(m * n), parallel(m * n);
        kernels::serial::matmul_nn(a.data(), b_nn.data(), serial.data(), m, k, n, false);
        kernels::parallel::matmul_nn(a.data(), b_nn.data(), parallel.data(), m, k, n, false);
        CHECK(serial == parallel);

        kernels::serial::matmul_nt(a.data(), b_nt.data(), serial.data(), m, k, n, false);
        kernels::parallel::matmul_nt(a.data(), b_nt.data(), parallel.data(), m, k, n, false);
        CHECK(serial == parallel);

        kernels::serial::matmul_tn(a_tn.data(), b_nn.data(), serial.data(), m, k, n, false);
        kernels::parallel::matmul_tn(a_tn.data(), b_nn.data(), parallel.data(), m, k, n, false);
        CHECK(serial == parallel);
    }
}

TEST_CASE("transpose variants agree with explicit transposition") {
    Rng rng(5);
    const int m = 6, k = 4, n = 3;
    auto a = random_buf(rng, m * k);
    auto b = random_buf(rng, k * n);

    // b transposed to n x k, then nt should reproduce nn.
    std::vector<double> bt(n * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
    std::vector<double> via_nn(m * n), via_nt(m * n);
    kernels::matmul_nn(a.data(), b.data(), via_nn.data(), m, k, n, false);
    kernels::matmul_nt(a.data(), bt.data(), via_nt.data(), m, k, n, false);
    for (size_t i = 0; i < via_nn.size(); ++i)
        CHECK(via_nn[i] == doctest::Approx(via_nt[i]).epsilon(1e-14));

    // a transposed to k x m, then tn should reproduce nn.
    std::vector<double> at(k * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
    std::vector<double> via_tn(m * n);
    kernels::matmul_tn(at.data(), b.data(), via_tn.data(), m, k, n, false);
    for (size_t i = 0; i < via_nn.size(); ++i)
        CHECK(via_nn[i] == doctest::Approx(via_tn[i]).epsilon(1e-14));
}

TEST_CASE("accumulate adds into the output") {
    std::vector<double> a = {1, 0, 0, 1};
    std::vector<double> b = {2, 0, 0, 2};
    std::vector<double> c = {10, 10, 10, 10};
    kernels::matmul_nn(a.data(), b.data(), c.data(), 2, 2, 2, true);
    CHECK(c[0] == 12.0);
    CHECK(c[1] == 10.0);
    CHECK(c[3] == 12.0);
}

}  // TEST_SUITE
