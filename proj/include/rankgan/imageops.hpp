#pragma once

#include "rankgan/geometry.hpp"
#include "rankgan/heatmap.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

// Plain (non-differentiating) image utilities on [C,H,W] tensors.

// Bilinear resample of the box region to oh x ow. Samples outside the image
// clamp to the border.
Tensor crop_resize(const Tensor& image, const Box& box, int oh, int ow);

Tensor resize_bilinear(const Tensor& image, int oh, int ow);

HeatMap resize_heatmap(const HeatMap& map, int oh, int ow);

// Writes patch (resized to the box extent) over the region of image,
// returning a modified copy. The box is clipped to the image bounds.
Tensor paste_patch(const Tensor& image, const Tensor& patch, const Box& box);

// Fraction of each cell covered by the box, on a gh x gw grid spanning the
// full image. Used as the location map when a ground-truth region is known.
HeatMap box_mask_map(const Box& box, int image_h, int image_w, int gh, int gw);

}  // namespace rankgan
