#pragma once

#include <algorithm>

namespace rankgan {

// Axis-aligned rectangle in pixel coordinates, top-left origin.
struct Box {
    double x = 0.0, y = 0.0;
    double w = 0.0, h = 0.0;
    double score = 0.0;
    int category = -1;

    double area() const { return w > 0.0 && h > 0.0 ? w * h : 0.0; }
    double x2() const { return x + w; }
    double y2() const { return y + h; }
};

inline double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
    return iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
}

}  // namespace rankgan
