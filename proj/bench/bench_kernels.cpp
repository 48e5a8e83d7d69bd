// Timing comparison between the serial reference kernels and the OpenMP
// versions at training-relevant and larger sizes.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rankgan/kernels.hpp"
#include "rankgan/rng.hpp"

using namespace rankgan;
namespace chrono = std::chrono;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <typename F>
double time_ms(int reps, F&& fn) {
    const auto t0 = chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = chrono::steady_clock::now();
    return chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_conv(int cin, int hw, int cout, int k, int reps) {
    Rng rng(1);
    const auto d = kernels::conv_dims(cin, hw, hw, cout, k, k, 1, 1);
    auto in = randv(rng, static_cast<std::size_t>(cin) * hw * hw);
    auto kk = randv(rng, static_cast<std::size_t>(cout) * cin * k * k);
    std::vector<double> out(static_cast<std::size_t>(cout) * d.oh * d.ow);
    std::vector<double> gout = randv(rng, out.size());
    std::vector<double> gin(in.size()), gk(kk.size());

    const double fwd_s = time_ms(reps, [&] {
        kernels::serial::conv2d_forward(in.data(), kk.data(), out.data(), d);
    });
    kernels::set_parallel(true);
    const double fwd_p = time_ms(reps, [&] {
        kernels::conv2d_forward(in.data(), kk.data(), out.data(), d);
    });
    const double gi_s = time_ms(reps, [&] {
        kernels::serial::conv2d_grad_input(gout.data(), kk.data(), gin.data(), d);
    });
    const double gi_p = time_ms(reps, [&] {
        kernels::conv2d_grad_input(gout.data(), kk.data(), gin.data(), d);
    });
    const double gk_s = time_ms(reps, [&] {
        kernels::serial::conv2d_grad_kernels(in.data(), gout.data(), gk.data(), d);
    });
    const double gk_p = time_ms(reps, [&] {
        kernels::conv2d_grad_kernels(in.data(), gout.data(), gk.data(), d);
    });
    std::printf("conv %dx%dx%d k%d c%-3d  fwd %8.3f / %8.3f  gin %8.3f / %8.3f  gk %8.3f / %8.3f\n",
                cin, hw, hw, k, cout, fwd_s, fwd_p, gi_s, gi_p, gk_s, gk_p);
}

void bench_ncc(int hw, int t, int reps) {
    Rng rng(2);
    auto img = randv(rng, static_cast<std::size_t>(hw) * hw);
    auto tmpl = randv(rng, static_cast<std::size_t>(t) * t);
    std::vector<double> heat(img.size());
    const double s = time_ms(reps, [&] {
        kernels::serial::ncc_match(img.data(), 1, hw, hw, tmpl.data(), t, t, heat.data());
    });
    kernels::set_parallel(true);
    const double p = time_ms(reps, [&] {
        kernels::ncc_match(img.data(), 1, hw, hw, tmpl.data(), t, t, heat.data());
    });
    std::printf("ncc  %dx%d tmpl %2d        %8.3f / %8.3f\n", hw, hw, t, s, p);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: not enabled\n");
#endif
    std::printf("times in ms per call, serial / parallel\n\n");
    bench_conv(1, 32, 8, 3, 200);
    bench_conv(8, 32, 16, 3, 100);
    bench_conv(16, 64, 32, 3, 20);
    bench_conv(32, 128, 32, 3, 3);
    std::printf("\n");
    bench_ncc(32, 16, 200);
    bench_ncc(128, 24, 10);
    bench_ncc(256, 32, 3);
    return 0;
}
