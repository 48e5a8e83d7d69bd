#include "rankgan/imageops.hpp"

#include <algorithm>
#include <cmath>

namespace rankgan {

namespace {

void check_image(const Tensor& image, const char* op) {
    if (!image.defined() || image.shape().size() != 3)
        throw DimensionError(std::string(op) + ": expects a [C,H,W] image");
}

// Bilinear sample with border clamping; (sy,sx) in pixel-center coordinates.
double sample(const std::vector<double>& v, int c, int h, int w, int ch, double sy, double sx) {
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double fy = sy - y0;
    const double fx = sx - x0;
    const std::size_t base = static_cast<std::size_t>(ch) * h * w;
    const double a = v[base + static_cast<std::size_t>(y0) * w + x0];
    const double b = v[base + static_cast<std::size_t>(y0) * w + x1];
    const double cc = v[base + static_cast<std::size_t>(y1) * w + x0];
    const double d = v[base + static_cast<std::size_t>(y1) * w + x1];
    (void)c;
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + cc * fy * (1 - fx) + d * fy * fx;
}

}  // namespace

Tensor crop_resize(const Tensor& image, const Box& box, int oh, int ow) {
    check_image(image, "crop_resize");
    if (oh <= 0 || ow <= 0) throw ParameterError("crop_resize: output size must be positive");
    if (box.w <= 0.0 || box.h <= 0.0) throw ParameterError("crop_resize: empty box");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            const double sy = box.y + (oy + 0.5) * box.h / oh - 0.5;
            for (int ox = 0; ox < ow; ++ox) {
                const double sx = box.x + (ox + 0.5) * box.w / ow - 0.5;
                out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] =
                    sample(image.values(), c, h, w, ch, sy, sx);
            }
        }
    }
    return Tensor::constant({c, oh, ow}, std::move(out));
}

Tensor resize_bilinear(const Tensor& image, int oh, int ow) {
    check_image(image, "resize_bilinear");
    Box full{0.0, 0.0, static_cast<double>(image.dim(2)), static_cast<double>(image.dim(1))};
    return crop_resize(image, full, oh, ow);
}

HeatMap resize_heatmap(const HeatMap& map, int oh, int ow) {
    Tensor t = Tensor::constant({1, map.height, map.width}, map.scores);
    Tensor r = resize_bilinear(t, oh, ow);
    HeatMap out(oh, ow, map.source);
    out.scores = r.values();
    return out;
}

Tensor paste_patch(const Tensor& image, const Tensor& patch, const Box& box) {
    check_image(image, "paste_patch");
    check_image(patch, "paste_patch");
    if (image.dim(0) != patch.dim(0))
        throw DimensionError("paste_patch: channel mismatch");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
    const int x1 = std::min(w, static_cast<int>(std::ceil(box.x + box.w)));
    const int y1 = std::min(h, static_cast<int>(std::ceil(box.y + box.h)));
    if (x1 <= x0 || y1 <= y0) return image.detached();

    Tensor resized = resize_bilinear(patch, y1 - y0, x1 - x0);
    std::vector<double> out = image.values();
    const int rh = y1 - y0, rw = x1 - x0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < rh; ++y)
            for (int x = 0; x < rw; ++x)
                out[(static_cast<std::size_t>(ch) * h + y0 + y) * w + x0 + x] =
                    std::clamp(resized.values()[(static_cast<std::size_t>(ch) * rh + y) * rw + x],
                               0.0, 1.0);
    return Tensor::constant({c, h, w}, std::move(out));
}

HeatMap box_mask_map(const Box& box, int image_h, int image_w, int gh, int gw) {
    if (gh <= 0 || gw <= 0) throw ParameterError("box_mask_map: grid size must be positive");
    HeatMap map(gh, gw, HeatMap::Source::cam);
    const double cell_h = static_cast<double>(image_h) / gh;
    const double cell_w = static_cast<double>(image_w) / gw;
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            Box cell{gx * cell_w, gy * cell_h, cell_w, cell_h};
            map.at(gy, gx) = intersection_area(box, cell) / cell.area();
        }
    }
    return map;
}

}  // namespace rankgan
