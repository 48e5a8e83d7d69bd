#pragma once

#include <string>
#include <vector>

#include "rankgan/heatmap.hpp"
#include "rankgan/scenegen.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

// Write-temp-then-rename; never leaves a partial file at the target path.
void atomic_write_file(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

// 8-bit binary PGM (1 channel) / PPM (3 channels); values clamped to [0,1].
void write_image(const std::string& path, const Tensor& image);
Tensor read_image(const std::string& path);

// Sidecar annotations, one instance per line: category x y w h.
std::string format_annotations(const std::vector<Instance>& instances);
void write_annotations(const std::string& path, const std::vector<Instance>& instances);
std::vector<Instance> read_annotations(const std::string& path);

// Heat maps as a plain-text float matrix ("rows cols" then row lines) and as
// a peak-normalized grayscale image.
void write_heatmap_text(const std::string& path, const HeatMap& map);
HeatMap read_heatmap_text(const std::string& path);
void write_heatmap_image(const std::string& path, const HeatMap& map);

}  // namespace rankgan
