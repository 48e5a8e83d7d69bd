#include "rankgan/kernels.hpp"

#include <atomic>
#include <cmath>

#include "rankgan/errors.hpp"

namespace rankgan::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// One output element per helper. Serial and OpenMP loops both call these, so
// the two paths are bit-identical regardless of scheduling.

inline double conv_out_element(const double* in, const double* k, const ConvDims& d,
                               int f, int oy, int ox) {
    double acc = 0.0;
    const int iy0 = oy * d.stride - d.pad;
    const int ix0 = ox * d.stride - d.pad;
    for (int c = 0; c < d.cin; ++c) {
        const double* in_c = in + static_cast<std::size_t>(c) * d.h * d.w;
        const double* k_fc = k + (static_cast<std::size_t>(f) * d.cin + c) * d.kh * d.kw;
        for (int ky = 0; ky < d.kh; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= d.h) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= d.w) continue;
                acc += in_c[iy * d.w + ix] * k_fc[ky * d.kw + kx];
            }
        }
    }
    return acc;
}

inline double conv_gin_element(const double* gout, const double* k, const ConvDims& d,
                               int c, int iy, int ix) {
    double acc = 0.0;
    if (d.stride == 1) {
        for (int f = 0; f < d.cout; ++f) {
            const double* g_f = gout + static_cast<std::size_t>(f) * d.oh * d.ow;
            const double* k_fc = k + (static_cast<std::size_t>(f) * d.cin + c) * d.kh * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                const int oy = iy + d.pad - ky;
                if (oy < 0 || oy >= d.oh) continue;
                for (int kx = 0; kx < d.kw; ++kx) {
                    const int ox = ix + d.pad - kx;
                    if (ox < 0 || ox >= d.ow) continue;
                    acc += g_f[oy * d.ow + ox] * k_fc[ky * d.kw + kx];
                }
            }
        }
        return acc;
    }
    for (int f = 0; f < d.cout; ++f) {
        const double* g_f = gout + static_cast<std::size_t>(f) * d.oh * d.ow;
        const double* k_fc = k + (static_cast<std::size_t>(f) * d.cin + c) * d.kh * d.kw;
        for (int ky = 0; ky < d.kh; ++ky) {
            const int oy_num = iy + d.pad - ky;
            if (oy_num < 0 || oy_num % d.stride != 0) continue;
            const int oy = oy_num / d.stride;
            if (oy >= d.oh) continue;
            for (int kx = 0; kx < d.kw; ++kx) {
                const int ox_num = ix + d.pad - kx;
                if (ox_num < 0 || ox_num % d.stride != 0) continue;
                const int ox = ox_num / d.stride;
                if (ox >= d.ow) continue;
                acc += g_f[oy * d.ow + ox] * k_fc[ky * d.kw + kx];
            }
        }
    }
    return acc;
}

inline double conv_gk_element(const double* in, const double* gout, const ConvDims& d,
                              int f, int c, int ky, int kx) {
    double acc = 0.0;
    const double* in_c = in + static_cast<std::size_t>(c) * d.h * d.w;
    const double* g_f = gout + static_cast<std::size_t>(f) * d.oh * d.ow;
    for (int oy = 0; oy < d.oh; ++oy) {
        const int iy = oy * d.stride - d.pad + ky;
        if (iy < 0 || iy >= d.h) continue;
        for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride - d.pad + kx;
            if (ix < 0 || ix >= d.w) continue;
            acc += in_c[iy * d.w + ix] * g_f[oy * d.ow + ox];
        }
    }
    return acc;
}

inline double ncc_element(const double* img, int c, int h, int w,
                          const double* tmpl, int th, int tw,
                          double t_mean, double t_var, int y, int x) {
    // Window statistics over all channels.
    const int n = c * th * tw;
    double w_sum = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        const double* im = img + static_cast<std::size_t>(ch) * h * w;
        for (int ty = 0; ty < th; ++ty) {
            const double* row = im + (y + ty) * w + x;
            for (int tx = 0; tx < tw; ++tx) w_sum += row[tx];
        }
    }
    const double w_mean = w_sum / n;
    double w_var = 0.0, cov = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        const double* im = img + static_cast<std::size_t>(ch) * h * w;
        const double* tm = tmpl + static_cast<std::size_t>(ch) * th * tw;
        for (int ty = 0; ty < th; ++ty) {
            const double* row = im + (y + ty) * w + x;
            const double* trow = tm + ty * tw;
            for (int tx = 0; tx < tw; ++tx) {
                const double wd = row[tx] - w_mean;
                w_var += wd * wd;
                cov += wd * (trow[tx] - t_mean);
            }
        }
    }
    if (w_var < 1e-12 || t_var < 1e-12) return 0.0;
    const double score = cov / std::sqrt(w_var * t_var);
    return score > 0.0 ? score : 0.0;
}

void tmpl_stats(const double* tmpl, int n, double& mean, double& var) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += tmpl[i];
    mean = s / n;
    var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = tmpl[i] - mean;
        var += d * d;
    }
}

}  // namespace

ConvDims conv_dims(int cin, int h, int w, int cout, int kh, int kw, int stride, int pad) {
    ConvDims d;
    d.cin = cin;
    d.h = h;
    d.w = w;
    d.cout = cout;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
    if (pad < 0) throw ParameterError("conv2d: pad must be >= 0");
    if (kh > h + 2 * pad || kw > w + 2 * pad)
        throw DimensionError("conv2d: kernel larger than padded input");
    d.oh = (h + 2 * pad - kh) / stride + 1;
    d.ow = (w + 2 * pad - kw) / stride + 1;
    return d;
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }

namespace serial {

void conv2d_forward(const double* in, const double* k, double* out, const ConvDims& d) {
    for (int f = 0; f < d.cout; ++f)
        for (int oy = 0; oy < d.oh; ++oy)
            for (int ox = 0; ox < d.ow; ++ox)
                out[(static_cast<std::size_t>(f) * d.oh + oy) * d.ow + ox] =
                    conv_out_element(in, k, d, f, oy, ox);
}

void conv2d_grad_input(const double* gout, const double* k, double* gin, const ConvDims& d) {
    for (int c = 0; c < d.cin; ++c)
        for (int iy = 0; iy < d.h; ++iy)
            for (int ix = 0; ix < d.w; ++ix)
                gin[(static_cast<std::size_t>(c) * d.h + iy) * d.w + ix] =
                    conv_gin_element(gout, k, d, c, iy, ix);
}

void conv2d_grad_kernels(const double* in, const double* gout, double* gk, const ConvDims& d) {
    for (int f = 0; f < d.cout; ++f)
        for (int c = 0; c < d.cin; ++c)
            for (int ky = 0; ky < d.kh; ++ky)
                for (int kx = 0; kx < d.kw; ++kx)
                    gk[((static_cast<std::size_t>(f) * d.cin + c) * d.kh + ky) * d.kw + kx] =
                        conv_gk_element(in, gout, d, f, c, ky, kx);
}

void ncc_match(const double* img, int c, int h, int w,
               const double* tmpl, int th, int tw, double* heat) {
    double t_mean = 0.0, t_var = 0.0;
    tmpl_stats(tmpl, c * th * tw, t_mean, t_var);
    for (int i = 0; i < h * w; ++i) heat[i] = 0.0;
    for (int y = 0; y + th <= h; ++y)
        for (int x = 0; x + tw <= w; ++x)
            heat[y * w + x] = ncc_element(img, c, h, w, tmpl, th, tw, t_mean, t_var, y, x);
}

}  // namespace serial

void conv2d_forward(const double* in, const double* k, double* out, const ConvDims& d) {
    if (!parallel_enabled()) {
        serial::conv2d_forward(in, k, out, d);
        return;
    }
    const long total = static_cast<long>(d.cout) * d.oh * d.ow;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < total; ++i) {
        const int f = static_cast<int>(i / (d.oh * d.ow));
        const int r = static_cast<int>(i % (d.oh * d.ow));
        out[i] = conv_out_element(in, k, d, f, r / d.ow, r % d.ow);
    }
}

void conv2d_grad_input(const double* gout, const double* k, double* gin, const ConvDims& d) {
    if (!parallel_enabled()) {
        serial::conv2d_grad_input(gout, k, gin, d);
        return;
    }
    const long total = static_cast<long>(d.cin) * d.h * d.w;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < total; ++i) {
        const int c = static_cast<int>(i / (d.h * d.w));
        const int r = static_cast<int>(i % (d.h * d.w));
        gin[i] = conv_gin_element(gout, k, d, c, r / d.w, r % d.w);
    }
}

void conv2d_grad_kernels(const double* in, const double* gout, double* gk, const ConvDims& d) {
    if (!parallel_enabled()) {
        serial::conv2d_grad_kernels(in, gout, gk, d);
        return;
    }
    const long total = static_cast<long>(d.cout) * d.cin * d.kh * d.kw;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < total; ++i) {
        const int f = static_cast<int>(i / (d.cin * d.kh * d.kw));
        long r = i % (d.cin * d.kh * d.kw);
        const int c = static_cast<int>(r / (d.kh * d.kw));
        r %= d.kh * d.kw;
        gk[i] = conv_gk_element(in, gout, d, f, c, static_cast<int>(r / d.kw),
                                static_cast<int>(r % d.kw));
    }
}

void ncc_match(const double* img, int c, int h, int w,
               const double* tmpl, int th, int tw, double* heat) {
    if (!parallel_enabled()) {
        serial::ncc_match(img, c, h, w, tmpl, th, tw, heat);
        return;
    }
    double t_mean = 0.0, t_var = 0.0;
    tmpl_stats(tmpl, c * th * tw, t_mean, t_var);
    for (int i = 0; i < h * w; ++i) heat[i] = 0.0;
    const int ymax = h - th;
#pragma omp parallel for schedule(static)
    for (int y = 0; y <= ymax; ++y)
        for (int x = 0; x + tw <= w; ++x)
            heat[y * w + x] = ncc_element(img, c, h, w, tmpl, th, tw, t_mean, t_var, y, x);
}

}  // namespace rankgan::kernels
