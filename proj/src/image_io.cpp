#include "rankgan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rankgan {

void atomic_write_file(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_image(const std::string& path, const Tensor& image) {
    if (image.shape().size() != 3)
        throw DimensionError("write_image: expects [C,H,W], got " + shape_str(image.shape()));
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (c != 1 && c != 3) throw DimensionError("write_image: channels must be 1 or 3");
    std::string bytes = c == 1 ? "P5\n" : "P6\n";
    bytes += std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < hw; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double v = std::clamp(image[ch * hw + i], 0.0, 1.0);
            bytes += static_cast<char>(std::lround(v * 255.0));
        }
    atomic_write_file(path, bytes);
}

Tensor read_image(const std::string& path) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if ((magic != "P5" && magic != "P6") || w <= 0 || h <= 0 || maxval != 255)
        throw CorruptionError("read_image: '" + path + "' is not an 8-bit PGM/PPM");
    in.get();  // single whitespace after the header
    const int c = magic == "P5" ? 1 : 3;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t need = hw * static_cast<std::size_t>(c);
    const std::size_t offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() < offset + need)
        throw CorruptionError("read_image: truncated pixel data in '" + path + "'");
    std::vector<double> values(need);
    for (std::size_t i = 0; i < hw; ++i)
        for (int ch = 0; ch < c; ++ch)
            values[ch * hw + i] =
                static_cast<unsigned char>(bytes[offset + i * c + ch]) / 255.0;
    return Tensor::constant({c, h, w}, std::move(values));
}

std::string format_annotations(const std::vector<Instance>& instances) {
    std::string out;
    char line[160];
    for (const auto& inst : instances) {
        std::snprintf(line, sizeof(line), "%d %.2f %.2f %.2f %.2f\n", inst.category,
                      inst.box.x, inst.box.y, inst.box.w, inst.box.h);
        out += line;
    }
    return out;
}

void write_annotations(const std::string& path, const std::vector<Instance>& instances) {
    atomic_write_file(path, format_annotations(instances));
}

std::vector<Instance> read_annotations(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<Instance> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        Instance inst;
        std::istringstream ls(line);
        if (!(ls >> inst.category >> inst.box.x >> inst.box.y >> inst.box.w >> inst.box.h))
            throw CorruptionError("read_annotations: bad line '" + line + "' in " + path);
        out.push_back(inst);
    }
    return out;
}

void write_heatmap_text(const std::string& path, const HeatMap& map) {
    std::string out = std::to_string(map.height) + " " + std::to_string(map.width) + "\n";
    char buf[40];
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            std::snprintf(buf, sizeof(buf), "%.9g", map.at(y, x));
            out += buf;
            out += x + 1 < map.width ? ' ' : '\n';
        }
    }
    atomic_write_file(path, out);
}

HeatMap read_heatmap_text(const std::string& path) {
    std::istringstream in(read_file(path));
    int h = 0, w = 0;
    if (!(in >> h >> w) || h <= 0 || w <= 0)
        throw CorruptionError("read_heatmap_text: bad header in " + path);
    HeatMap map(h, w);
    for (auto& s : map.scores)
        if (!(in >> s)) throw CorruptionError("read_heatmap_text: truncated data in " + path);
    return map;
}

void write_heatmap_image(const std::string& path, const HeatMap& map) {
    HeatMap norm = map;
    norm.normalize_max();
    Tensor img = Tensor::constant({1, norm.height, norm.width}, norm.scores);
    write_image(path, img);
}

}  // namespace rankgan
