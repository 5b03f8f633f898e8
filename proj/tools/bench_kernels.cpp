// Compares the OpenMP kernels against the serial reference on the layer
// shapes the default models actually use, printing per-kernel throughput.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>

#include "movedec/kernels.hpp"
#include "movedec/kernels_ref.hpp"
#include "movedec/rng.hpp"

using movedec::Rng;
using movedec::nn::Tensor;
namespace k = movedec::nn::kernels;
namespace kr = movedec::nn::kernels_ref;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& x : t.v) x = rng.uniform(-1.0, 1.0);
    return t;
}

template <class F>
double time_ms(F&& fn, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_conv(const std::string& name, const k::ConvSpec& s, std::vector<int> xs, int reps) {
    Rng rng(1);
    Tensor x = random_tensor(xs, rng);
    std::vector<int> wshape{s.out_ch, s.in_ch};
    for (int a = 0; a < s.rank; ++a) wshape.push_back(s.kernel[static_cast<std::size_t>(a)]);
    Tensor w = random_tensor(wshape, rng);
    Tensor b = random_tensor({s.out_ch}, rng);
    Tensor y(k::conv_out_shape(xs, s));

    double macs = static_cast<double>(y.numel()) * s.in_ch;
    for (int a = 0; a < s.rank; ++a) macs *= s.kernel[static_cast<std::size_t>(a)];

    const double par = time_ms([&] { k::conv_forward(x, w, b, y, s); }, reps);
    const double ser = time_ms([&] { kr::conv_forward(x, w, b, y, s); }, reps);
    std::printf("%-28s %8.2f ms  %8.2f ms  %6.2fx  %7.2f GMAC/s\n", name.c_str(), par, ser,
                ser / par, macs / par / 1e6);
}

void bench_dense(const std::string& name, int n, int f, int g, int reps) {
    Rng rng(2);
    Tensor x = random_tensor({n, f}, rng);
    Tensor w = random_tensor({f, g}, rng);
    Tensor b = random_tensor({g}, rng);
    Tensor y({n, g});
    const double macs = static_cast<double>(n) * f * g;
    const double par = time_ms([&] { k::dense_forward(x, w, b, y); }, reps);
    const double ser = time_ms([&] { kr::dense_forward(x, w, b, y); }, reps);
    std::printf("%-28s %8.2f ms  %8.2f ms  %6.2fx  %7.2f GMAC/s\n", name.c_str(), par, ser,
                ser / par, macs / par / 1e6);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::stoi(argv[1]);
    std::printf("threads: %d, reps: %d\n", omp_get_max_threads(), reps);
    std::printf("%-28s %11s  %11s  %7s  %13s\n", "kernel", "parallel", "serial", "speedup",
                "parallel rate");

    k::ConvSpec c1;
    c1.rank = 1;
    c1.in_ch = 64;
    c1.out_ch = 32;
    c1.kernel = {7, 1, 1};
    c1.padding = k::Padding::same;
    bench_conv("conv1d 24x64x200 k7", c1, {24, 64, 200}, reps);

    k::ConvSpec c2;
    c2.rank = 2;
    c2.in_ch = 8;
    c2.out_ch = 16;
    c2.kernel = {3, 3, 1};
    c2.padding = k::Padding::same;
    bench_conv("conv2d 24x8x32x32 k3", c2, {24, 8, 32, 32}, reps);

    k::ConvSpec c3;
    c3.rank = 3;
    c3.in_ch = 1;
    c3.out_ch = 8;
    c3.kernel = {3, 3, 7};
    c3.padding = k::Padding::same;
    bench_conv("conv3d 8x1x8x8x200 k3x3x7", c3, {8, 1, 8, 8, 200}, reps);

    bench_dense("dense 24x6400->64", 24, 6400, 64, reps);
    bench_dense("dense 120x64->64", 120, 64, 64, reps * 10);
    return 0;
}
