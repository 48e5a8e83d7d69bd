#pragma once

#include <cstddef>

namespace rankgan::kernels {

// Geometry of one 2-D cross-correlation: input [cin,h,w], kernels
// [cout,cin,kh,kw], output [cout,oh,ow].
struct ConvDims {
    int cin = 0, h = 0, w = 0;
    int cout = 0, kh = 0, kw = 0;
    int stride = 1, pad = 0;
    int oh = 0, ow = 0;
};

ConvDims conv_dims(int cin, int h, int w, int cout, int kh, int kw, int stride, int pad);

// Runtime switch between the OpenMP kernels and the serial reference.
// Both produce bit-identical results; the switch exists for benchmarking
// and for pinning tests to one side.
bool parallel_enabled();
void set_parallel(bool enabled);

// Dispatching entry points (parallel by default).
void conv2d_forward(const double* in, const double* k, double* out, const ConvDims& d);
void conv2d_grad_input(const double* gout, const double* k, double* gin, const ConvDims& d);
void conv2d_grad_kernels(const double* in, const double* gout, double* gk, const ConvDims& d);

// Normalized cross-correlation of one template over every window position
// whose window fits inside the image. heat has h*w entries; positions where
// the window does not fit stay 0. Scores are rectified at 0 and windows with
// (near) zero variance score 0.
void ncc_match(const double* img, int c, int h, int w,
               const double* tmpl, int th, int tw, double* heat);

// Serial reference implementations, kept callable for tests and benchmarks.
namespace serial {
void conv2d_forward(const double* in, const double* k, double* out, const ConvDims& d);
void conv2d_grad_input(const double* gout, const double* k, double* gin, const ConvDims& d);
void conv2d_grad_kernels(const double* in, const double* gout, double* gk, const ConvDims& d);
void ncc_match(const double* img, int c, int h, int w,
               const double* tmpl, int th, int tw, double* heat);
}  // namespace serial

}  // namespace rankgan::kernels
