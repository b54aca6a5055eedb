#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "sadm/kernels.hpp"
#include "sadm/rng.hpp"

using namespace sadm;
using clk = std::chrono::steady_clock;

namespace {

template <typename F>
double time_best(int reps, F&& f) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clk::now();
        f();
        best = std::min(best, std::chrono::duration<double>(clk::now() - t0).count());
    }
    return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

void report(const char* name, double serial, double parallel, double diff) {
    std::printf("%-24s serial %8.4f s  parallel %8.4f s  speedup %5.2fx  max|diff| %.3g\n", name, serial,
                parallel, serial / parallel, diff);
}

std::vector<double> randn(Rng& rng, std::int64_t n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

int main() {
    Rng rng(7);

    {
        const std::int64_t m = 256, k = 512, n = 256;
        auto a = randn(rng, m * k);
        auto b = randn(rng, k * n);
        std::vector<double> c1(static_cast<std::size_t>(m * n)), c2(c1.size());
        double ts = time_best(3, [&] {
            std::fill(c1.begin(), c1.end(), 0.0);
            kernels::matmul_acc_serial(a.data(), b.data(), c1.data(), m, k, n);
        });
        double tp = time_best(3, [&] {
            std::fill(c2.begin(), c2.end(), 0.0);
            kernels::matmul_acc(a.data(), b.data(), c2.data(), m, k, n);
        });
        report("matmul 256x512x256", ts, tp, max_abs_diff(c1, c2));
    }

    {
        const std::int64_t n = 1 << 22;
        auto a = randn(rng, n);
        auto b = randn(rng, n);
        std::vector<double> o1(static_cast<std::size_t>(n)), o2(o1.size());
        double ts = time_best(5, [&] { kernels::add_serial(a.data(), b.data(), o1.data(), n); });
        double tp = time_best(5, [&] { kernels::add(a.data(), b.data(), o2.data(), n); });
        report("add 4M", ts, tp, max_abs_diff(o1, o2));
    }

    {
        const std::int64_t n = 1 << 22;
        auto a = randn(rng, n);
        auto b = randn(rng, n);
        std::vector<double> o1(static_cast<std::size_t>(n)), o2(o1.size());
        double ts = time_best(5, [&] { kernels::mul_serial(a.data(), b.data(), o1.data(), n); });
        double tp = time_best(5, [&] { kernels::mul(a.data(), b.data(), o2.data(), n); });
        report("mul 4M", ts, tp, max_abs_diff(o1, o2));
    }

    {
        kernels::ConvDims cd = kernels::conv_dims(32, 32, 32, 16, 3, 3, 3, 1, 1, 1, 1, 1, 1);
        auto x = randn(rng, cd.cin * cd.w * cd.h * cd.d);
        const std::int64_t rows = cd.cin * cd.kw * cd.kh * cd.kd;
        const std::int64_t cols = cd.ow * cd.oh * cd.od;
        std::vector<double> c1(static_cast<std::size_t>(rows * cols)), c2(c1.size());
        double ts = time_best(3, [&] { kernels::im2col_serial(x.data(), cd, c1.data()); });
        double tp = time_best(3, [&] { kernels::im2col(x.data(), cd, c2.data()); });
        report("im2col 32ch 32x32x16", ts, tp, max_abs_diff(c1, c2));
    }

    return 0;
}
