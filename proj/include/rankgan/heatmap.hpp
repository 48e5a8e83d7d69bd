#pragma once

#include <vector>

#include "rankgan/errors.hpp"

namespace rankgan {

// 2-D non-negative score grid over image positions.
struct HeatMap {
    enum class Source { cam, template_match };

    int height = 0;
    int width = 0;
    std::vector<double> scores;  // row-major
    Source source = Source::cam;

    HeatMap() = default;
    HeatMap(int h, int w, Source src = Source::cam)
        : height(h), width(w), scores(static_cast<std::size_t>(h) * w, 0.0), source(src) {}

    double at(int y, int x) const { return scores[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return scores[static_cast<std::size_t>(y) * width + x]; }

    double max_value() const {
        double m = 0.0;
        for (double s : scores) m = s > m ? s : m;
        return m;
    }

    // Scales so the peak is 1 when any positive activation exists.
    void normalize_max() {
        const double m = max_value();
        if (m <= 0.0) return;
        for (double& s : scores) s /= m;
    }
};

}  // namespace rankgan
