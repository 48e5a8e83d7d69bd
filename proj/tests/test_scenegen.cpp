#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <set>

#include "rankgan/scenegen.hpp"

using namespace rankgan;

TEST_CASE("single-object scene is reproduced exactly from its seed") {
    SceneSpec spec;
    spec.max_objects = 1;
    spec.clutter = 0.0;
    Scene a = generate_scene(0, spec);
    Scene b = generate_scene(0, spec);
    REQUIRE(a.boxes().size() == 1);
    REQUIRE(a.image().size() == b.image().size());
    CHECK(std::memcmp(a.image().values().data(), b.image().values().data(),
                      a.image().size() * sizeof(double)) == 0);
    CHECK(a.boxes()[0].category == b.boxes()[0].category);
}

TEST_CASE("multi-object scenes carry at least two distinct categories") {
    SceneSpec spec;
    spec.max_objects = 2;
    bool saw_pair = false;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Scene s = generate_scene(seed, spec);
        if (s.boxes().size() >= 2) {
            saw_pair = true;
            std::set<int> cats;
            for (const auto& inst : s.boxes()) cats.insert(inst.category);
            CHECK(cats.size() >= 2);
            for (int c : cats)
                CHECK(std::count(spec.categories.begin(), spec.categories.end(), c) == 1);
        }
    }
    CHECK(saw_pair);
}

TEST_CASE("1000 scenes keep boxes in bounds with a sane object count") {
    SceneSpec spec;
    spec.max_objects = 3;
    spec.clutter = 0.5;
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Scene s = generate_scene(seed, spec);
        total += static_cast<double>(s.boxes().size());
        CHECK(s.boxes().size() >= 1);
        CHECK(s.boxes().size() <= 3);
        for (const auto& inst : s.boxes()) {
            CHECK(inst.box.x >= 0.0);
            CHECK(inst.box.y >= 0.0);
            CHECK(inst.box.x2() <= spec.image_size);
            CHECK(inst.box.y2() <= spec.image_size);
            CHECK(inst.box.w > 0.0);
            CHECK(inst.box.h > 0.0);
        }
        for (double v : s.image().values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    const double mean = total / 1000.0;
    CHECK(mean >= 1.0);
    CHECK(mean <= 3.0);
}

TEST_CASE("weak mode hides boxes behind the supervision firewall") {
    SceneSpec spec;
    spec.supervision = Supervision::weak;
    Scene s = generate_scene(3, spec);
    CHECK_THROWS_AS(s.boxes(), SupervisionError);
    CHECK(!s.labels().empty());

    reset_privileged_box_reads();
    CHECK(privileged_box_reads() == 0);
    const auto& boxes = s.privileged_boxes();
    CHECK(!boxes.empty());
    CHECK(privileged_box_reads() == 1);
    reset_privileged_box_reads();
}

TEST_CASE("unknown categories are rejected") {
    SceneSpec spec;
    spec.categories = {7};
    CHECK_THROWS_AS(generate_scene(0, spec), LookupError);
    CategoryBank bank;
    CHECK_THROWS_AS(bank.sample(9, 0), LookupError);
    CHECK_THROWS_AS(bank.sample(-1, 0), LookupError);
}

TEST_CASE("impossible placements raise a generation error after bounded retries") {
    SceneSpec spec;
    spec.image_size = 16;
    spec.max_objects = 24;
    spec.clutter = 0.0;
    bool raised = false;
    for (std::uint64_t seed = 0; seed < 60 && !raised; ++seed) {
        try {
            (void)generate_scene(seed, spec);
        } catch (const GenerationError&) {
            raised = true;
        }
    }
    CHECK(raised);
}

TEST_CASE("bank samples are deterministic per (category, seed) and separated by category") {
    CategoryBank bank;
    Tensor a1 = bank.sample(0, 5);
    Tensor a2 = bank.sample(0, 5);
    CHECK(std::memcmp(a1.values().data(), a2.values().data(),
                      a1.size() * sizeof(double)) == 0);
    Tensor b = bank.sample(1, 5);
    double diff = 0.0;
    for (std::size_t i = 0; i < a1.size(); ++i) diff += std::abs(a1[i] - b[i]);
    CHECK(diff > 1.0);
    CHECK(bank.category_count() >= 5);
    CHECK(bank.category_name(0) == "disk");
}

TEST_CASE("bank patches stay in range with a clean background") {
    CategoryBank bank;
    for (int cat = 0; cat < bank.category_count(); ++cat) {
        Tensor p = bank.sample(cat, 123);
        REQUIRE(p.shape() == Shape{1, 16, 16});
        for (double v : p.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // corners are background
        CHECK(p[0] == doctest::Approx(0.05));
    }
}
