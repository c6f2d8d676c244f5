// Times the OpenMP matmul kernels against the serial reference and checks
// that both produce identical bits.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "osm/kernels.hpp"
#include "osm/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(void (*fn)(const double*, const double*, double*, int, int, int, bool),
               const double* a, const double* b, double* c, int n, int reps) {
    fn(a, b, c, n, n, n, false);  // warm up
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn(a, b, c, n, n, n, false);
    auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> sizes = {64, 128, 256, 512};
    if (argc > 1) {
        sizes.clear();
        for (int i = 1; i < argc; ++i) sizes.push_back(std::atoi(argv[i]));
    }

    std::printf("%8s %12s %12s %9s %10s\n", "n", "serial ms", "parallel ms", "speedup",
                "max |diff|");
    for (int n : sizes) {
        osm::Rng rng(7);
        std::vector<double> a(static_cast<size_t>(n) * n), b(a.size());
        std::vector<double> cs(a.size()), cp(a.size());
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);

        int reps = n <= 128 ? 20 : (n <= 256 ? 8 : 3);
        double ms_serial =
            time_ms(osm::kernels::serial::matmul_nn, a.data(), b.data(), cs.data(), n, reps);
        double ms_parallel =
            time_ms(osm::kernels::parallel::matmul_nn, a.data(), b.data(), cp.data(), n, reps);

        double max_diff = 0.0;
        for (size_t i = 0; i < cs.size(); ++i)
            max_diff = std::max(max_diff, std::fabs(cs[i] - cp[i]));

        std::printf("%8d %12.3f %12.3f %8.2fx %10.3g\n", n, ms_serial, ms_parallel,
                    ms_serial / ms_parallel, max_diff);
    }
    return 0;
}
