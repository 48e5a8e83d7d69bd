#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rankgan/geometry.hpp"
#include "rankgan/rng.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

enum class Supervision { full, weak };

struct Instance {
    int category = -1;
    Box box;
};

struct SceneSpec {
    std::vector<int> categories = {0, 1, 2, 3, 4};
    int max_objects = 2;
    int image_size = 32;
    int channels = 1;
    double clutter = 0.3;
    double rot_jitter = 0.8;   // pose range for non-round shapes
    double intensity_lo = 0.4;
    double intensity_hi = 1.0;
    double shape_jitter = 0.6;  // within-category morphology variation
    Supervision supervision = Supervision::full;
};

// Rendered multi-object image plus per-instance labels. In weak mode the
// public accessor refuses to reveal boxes; the evaluator goes through
// privileged_boxes(), which is instrumented with a global counter so tests
// can prove training never touched it.
class Scene {
public:
    Scene() = default;
    Scene(Tensor image, std::vector<Instance> instances, Supervision mode);

    const Tensor& image() const { return image_; }
    int channels() const { return image_.dim(0); }
    int height() const { return image_.dim(1); }
    int width() const { return image_.dim(2); }
    Supervision supervision() const { return mode_; }

    // Categories present, sorted ascending, duplicates removed.
    std::vector<int> labels() const;

    // Instance boxes; raises SupervisionError in weak mode.
    const std::vector<Instance>& boxes() const;

    // Evaluation-only access, counted by privileged_box_reads().
    const std::vector<Instance>& privileged_boxes() const;

    Scene with_supervision(Supervision mode) const;

private:
    Tensor image_;
    std::vector<Instance> instances_;
    Supervision mode_ = Supervision::full;
};

std::uint64_t privileged_box_reads();
void reset_privileged_box_reads();

// Isolated object patches per category: the surrogate positive/negative
// sample source for weak-mode ranking pairs.
class CategoryBank {
public:
    explicit CategoryBank(int patch_size = 16, int channels = 1, double pose_jitter = 0.8,
                          double intensity_lo = 0.4, double intensity_hi = 1.0,
                          double shape_jitter = 0.6);

    int category_count() const { return 5; }
    int patch_size() const { return patch_size_; }
    int channels() const { return channels_; }
    const std::string& category_name(int category) const;

    // Deterministic in (category, seed); clean background, one object.
    Tensor sample(int category, std::uint64_t seed) const;

private:
    int patch_size_;
    int channels_;
    double pose_jitter_;
    double intensity_lo_, intensity_hi_;
    double shape_jitter_;
};

Tensor bank_sample(const CategoryBank& bank, int category, std::uint64_t seed);

Scene generate_scene(std::uint64_t seed, const SceneSpec& spec);

std::vector<Scene> generate_dataset(std::uint64_t seed, const SceneSpec& spec, int count);

}  // namespace rankgan
