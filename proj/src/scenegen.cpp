#include "rankgan/scenegen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "rankgan/metrics.hpp"

namespace rankgan {

namespace {

std::atomic<std::uint64_t> g_privileged_reads{0};

const char* kCategoryNames[5] = {"disk", "square", "triangle", "cross", "ring"};

// Per-instance morphology: two jitter draws in [-1,1] deform each shape
// within its category (aspect, skew, arm/ring thickness).
struct Morph {
    double a = 0.0, b = 0.0;
};

// Shape membership in unit coordinates, rotated about the center.
bool inside_shape(int kind, double u, double v, double rot, const Morph& m) {
    if (rot != 0.0) {
        const double cu = u - 0.5, cv = v - 0.5;
        const double c = std::cos(-rot), s = std::sin(-rot);
        u = 0.5 + c * cu - s * cv;
        v = 0.5 + s * cu + c * cv;
    }
    const double du = u - 0.5, dv = v - 0.5;
    switch (kind) {
        case 0: {  // disk -> ellipse
            const double rx = 0.48 * (1.0 + 0.3 * m.a);
            const double ry = 0.48 * (1.0 + 0.3 * m.b);
            return (du / rx) * (du / rx) + (dv / ry) * (dv / ry) <= 1.0;
        }
        case 1: {  // square -> rectangle
            const double hx = 0.45 * (1.0 + 0.3 * m.a);
            const double hy = 0.45 * (1.0 + 0.3 * m.b);
            return std::abs(du) <= hx && std::abs(dv) <= hy;
        }
        case 2: {  // triangle, apex up with skewed apex and base width
            if (v < 0.04 || v > 0.96) return false;
            const double t = (v - 0.04) / 0.92;  // 0 at apex, 1 at base
            const double apex = 0.3 * m.a;       // horizontal apex offset
            const double half = 0.46 * (1.0 + 0.35 * m.b);
            const double center = apex * (1.0 - t);
            return std::abs(du - center) <= half * t;
        }
        case 3: {  // cross with jittered arm thicknesses
            const double tx = 0.16 * (1.0 + 0.55 * m.a);
            const double ty = 0.16 * (1.0 + 0.55 * m.b);
            return (std::abs(du) <= tx || std::abs(dv) <= ty) &&
                   std::abs(du) <= 0.46 && std::abs(dv) <= 0.46;
        }
        case 4: {  // ring with jittered thickness and outer radius
            const double outer = 0.48 * (1.0 + 0.12 * m.a);
            const double inner = std::max(0.10, (0.26 + 0.12 * m.b));
            const double r2 = du * du + dv * dv;
            return r2 <= outer * outer && r2 >= inner * inner;
        }
        default:
            throw LookupError("unknown shape category " + std::to_string(kind));
    }
}

// Paints one shape into the image with 3x3 supersampled coverage.
void render_shape(std::vector<double>& img, int channels, int h, int w, int kind,
                  const Box& box, const std::vector<double>& intensity, double rot,
                  const Morph& morph) {
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
    const int x1 = std::min(w, static_cast<int>(std::ceil(box.x + box.w)));
    const int y1 = std::min(h, static_cast<int>(std::ceil(box.y + box.h)));
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            int hits = 0;
            for (int sy = 0; sy < 3; ++sy) {
                for (int sx = 0; sx < 3; ++sx) {
                    const double py = y + (sy + 0.5) / 3.0;
                    const double px = x + (sx + 0.5) / 3.0;
                    const double u = (px - box.x) / box.w;
                    const double v = (py - box.y) / box.h;
                    if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) continue;
                    if (inside_shape(kind, u, v, rot, morph)) ++hits;
                }
            }
            if (hits == 0) continue;
            const double cov = hits / 9.0;
            for (int c = 0; c < channels; ++c) {
                double& px = img[(static_cast<std::size_t>(c) * h + y) * w + x];
                px = px * (1.0 - cov) + intensity[static_cast<std::size_t>(c)] * cov;
            }
        }
    }
}

std::vector<double> sample_intensity(Rng& rng, int channels, double lo, double hi) {
    std::vector<double> out(static_cast<std::size_t>(channels));
    const double base = rng.uniform(lo, hi);
    for (auto& v : out) v = channels == 1 ? base : std::clamp(base * rng.uniform(0.7, 1.2), 0.2, 1.0);
    return out;
}

// Rotation only shows on shapes without full rotational symmetry.
double sample_rotation(Rng& rng, int category, double jitter) {
    if (jitter <= 0.0) return 0.0;
    if (category == 1 || category == 2 || category == 3) return rng.uniform(-jitter, jitter);
    return 0.0;
}

Morph sample_morph(Rng& rng, double jitter) {
    Morph m;
    m.a = jitter * rng.uniform(-1.0, 1.0);
    m.b = jitter * rng.uniform(-1.0, 1.0);
    return m;
}

}  // namespace

Scene::Scene(Tensor image, std::vector<Instance> instances, Supervision mode)
    : image_(std::move(image)), instances_(std::move(instances)), mode_(mode) {}

std::vector<int> Scene::labels() const {
    std::vector<int> out;
    for (const auto& inst : instances_) out.push_back(inst.category);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

const std::vector<Instance>& Scene::boxes() const {
    if (mode_ == Supervision::weak)
        throw SupervisionError("scene: boxes are hidden under weak supervision");
    return instances_;
}

const std::vector<Instance>& Scene::privileged_boxes() const {
    g_privileged_reads.fetch_add(1, std::memory_order_relaxed);
    return instances_;
}

Scene Scene::with_supervision(Supervision mode) const {
    return Scene(image_, instances_, mode);
}

std::uint64_t privileged_box_reads() { return g_privileged_reads.load(std::memory_order_relaxed); }
void reset_privileged_box_reads() { g_privileged_reads.store(0, std::memory_order_relaxed); }

CategoryBank::CategoryBank(int patch_size, int channels, double pose_jitter,
                           double intensity_lo, double intensity_hi, double shape_jitter)
    : patch_size_(patch_size), channels_(channels), pose_jitter_(pose_jitter),
      intensity_lo_(intensity_lo), intensity_hi_(intensity_hi),
      shape_jitter_(shape_jitter) {
    if (patch_size < 8) throw ParameterError("category bank: patch size must be >= 8");
    if (channels != 1 && channels != 3)
        throw ParameterError("category bank: channels must be 1 or 3");
}

const std::string& CategoryBank::category_name(int category) const {
    static const std::string names[5] = {kCategoryNames[0], kCategoryNames[1],
                                         kCategoryNames[2], kCategoryNames[3],
                                         kCategoryNames[4]};
    if (category < 0 || category >= category_count())
        throw LookupError("category bank: unknown category " + std::to_string(category));
    return names[category];
}

Tensor CategoryBank::sample(int category, std::uint64_t seed) const {
    if (category < 0 || category >= category_count())
        throw LookupError("category bank: unknown category " + std::to_string(category));
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(category) + 1, 0xbabb1eULL));
    const int ps = patch_size_;
    std::vector<double> img(static_cast<std::size_t>(channels_) * ps * ps, 0.05);

    const double side = ps * rng.uniform(0.7, 1.0);
    const Box box{(ps - side) / 2.0, (ps - side) / 2.0, side, side};
    const auto intensity = sample_intensity(rng, channels_, intensity_lo_, intensity_hi_);
    const double rot = sample_rotation(rng, category, pose_jitter_);
    const Morph morph = sample_morph(rng, shape_jitter_);
    render_shape(img, channels_, ps, ps, category, box, intensity, rot, morph);
    return Tensor::constant({channels_, ps, ps}, std::move(img));
}

Tensor bank_sample(const CategoryBank& bank, int category, std::uint64_t seed) {
    return bank.sample(category, seed);
}

Scene generate_scene(std::uint64_t seed, const SceneSpec& spec) {
    if (spec.image_size < 16) throw ParameterError("generate_scene: image size must be >= 16");
    if (spec.max_objects < 1) throw ParameterError("generate_scene: max_objects must be >= 1");
    if (spec.categories.empty()) throw ParameterError("generate_scene: no categories requested");
    for (int c : spec.categories)
        if (c < 0 || c >= 5)
            throw LookupError("generate_scene: category " + std::to_string(c) +
                              " not in the bank");

    Rng rng(Rng::mix(seed, 0x5ce9e));
    const int n = spec.image_size;
    const int ch = spec.channels;
    std::vector<double> img(static_cast<std::size_t>(ch) * n * n, 0.08);

    // Background clutter: a soft gradient plus a couple of dim blobs.
    if (spec.clutter > 0.0) {
        const double amp = 0.15 * spec.clutter;
        const double angle = rng.uniform(0.0, 6.283185307179586);
        const double gx = std::cos(angle), gy = std::sin(angle);
        for (int c = 0; c < ch; ++c)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x)
                    img[(static_cast<std::size_t>(c) * n + y) * n + x] +=
                        amp * 0.5 * (1.0 + (gx * x + gy * y) / n);
        const int blobs = rng.uniform_int(3);
        for (int b = 0; b < blobs; ++b) {
            const double bx = rng.uniform(0.0, n), by = rng.uniform(0.0, n);
            const double br = rng.uniform(2.0, 5.0);
            const double bi = 0.12 * spec.clutter * rng.uniform(0.5, 1.0);
            for (int c = 0; c < ch; ++c)
                for (int y = 0; y < n; ++y)
                    for (int x = 0; x < n; ++x) {
                        const double d2 =
                            (x - bx) * (x - bx) + (y - by) * (y - by);
                        if (d2 < br * br)
                            img[(static_cast<std::size_t>(c) * n + y) * n + x] += bi;
                    }
        }
    }

    // Object count and categories. Multi-object scenes always carry at least
    // two distinct categories so ranking pairs stay well defined.
    const int count = 1 + rng.uniform_int(spec.max_objects);
    std::vector<int> cats;
    if (count >= 2 && spec.categories.size() >= 2) {
        std::vector<int> pool = spec.categories;
        for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i)
            std::swap(pool[static_cast<std::size_t>(i)],
                      pool[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
        for (int i = 0; i < count; ++i)
            cats.push_back(pool[static_cast<std::size_t>(i) % pool.size()]);
    } else {
        for (int i = 0; i < count; ++i)
            cats.push_back(spec.categories[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(spec.categories.size())))]);
    }

    std::vector<Instance> instances;
    const int side_min = n / 4;
    const int side_max = n / 2;
    for (int cat : cats) {
        bool placed = false;
        for (int attempt = 0; attempt < 80 && !placed; ++attempt) {
            const double side = rng.uniform(side_min, side_max);
            const double x = rng.uniform(0.0, n - side);
            const double y = rng.uniform(0.0, n - side);
            Box candidate{x, y, side, side};
            bool ok = true;
            for (const auto& inst : instances)
                if (iou(candidate, inst.box) > 0.2) ok = false;
            if (!ok) continue;
            const auto intensity = sample_intensity(rng, ch, spec.intensity_lo,
                                                    spec.intensity_hi);
            const double rot = sample_rotation(rng, cat, spec.rot_jitter);
            const Morph morph = sample_morph(rng, spec.shape_jitter);
            render_shape(img, ch, n, n, cat, candidate, intensity, rot, morph);
            instances.push_back({cat, candidate});
            placed = true;
        }
        if (!placed)
            throw GenerationError("generate_scene: could not place " +
                                  std::to_string(count) + " objects on a " +
                                  std::to_string(n) + "px canvas");
    }

    // Sensor-style noise on top of everything.
    if (spec.clutter > 0.0) {
        const double sigma = 0.06 * spec.clutter;
        for (auto& px : img) px += sigma * rng.normal();
    }
    for (auto& px : img) px = std::clamp(px, 0.0, 1.0);

    return Scene(Tensor::constant({ch, n, n}, std::move(img)), std::move(instances),
                 spec.supervision);
}

std::vector<Scene> generate_dataset(std::uint64_t seed, const SceneSpec& spec, int count) {
    std::vector<Scene> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(generate_scene(Rng::mix(seed, static_cast<std::uint64_t>(i)), spec));
    return out;
}

}  // namespace rankgan
