#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "rankgan/checkpoint.hpp"
#include "rankgan/config.hpp"
#include "rankgan/image_io.hpp"
#include "rankgan/scenegen.hpp"
#include "rankgan/training.hpp"

using namespace rankgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() /
              ("rankgan_test_" + std::to_string(static_cast<unsigned>(std::rand())));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

Config small_config() {
    Config cfg = default_config();
    cfg.train.scene.image_size = 16;
    cfg.train.net.scene_size = 16;
    cfg.train.net.patch_size = 8;
    cfg.train.net.d_vis = 12;
    cfg.train.net.d_loc = 4;
    cfg.train.net.enc_c1 = 2;
    cfg.train.net.enc_c2 = 3;
    cfg.train.net.enc_c3 = 4;
    cfg.train.net.gen_fc1 = 8;
    cfg.train.net.gen_c0 = 4;
    cfg.train.net.gen_c1 = 3;
    cfg.train.net.gen_c2 = 2;
    cfg.train.dataset_scenes = 6;
    cfg.train.steps = 2;
    cfg.train.batch = 2;
    cfg.train.pretrain_steps = 0;
    cfg.train.gen_pretrain_steps = 0;
    return cfg;
}

}  // namespace

TEST_CASE("default coefficients match the committed values") {
    Config cfg = default_config();
    CHECK(cfg.train.coeffs.rank == 0.05);
    CHECK(cfg.train.coeffs.img == 1e-6);
    CHECK(cfg.train.coeffs.feat == 1e-5);
    CHECK(cfg.train.coeffs.adv == 100.0);
    CHECK(cfg.train.adam.beta1 == 0.9);
    CHECK(cfg.train.adam.beta2 == 0.99);
    CHECK(cfg.train.adam.lr == 1e-4);
    CHECK(cfg.train.k_top == 5);
}

TEST_CASE("config serialization round-trips exactly") {
    Config cfg = default_config();
    cfg.train.steps = 123;
    cfg.train.coeffs.img = 3.5e-7;
    cfg.discovery.scales = {0.5, 1.0, 2.0};
    const std::string text = serialize_config(cfg);
    Config back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.train.steps == 123);
    CHECK(back.train.coeffs.img == 3.5e-7);
    CHECK(back.discovery.scales == std::vector<double>{0.5, 1.0, 2.0});
}

TEST_CASE("config rejects unknown keys, unknown sections and bad values") {
    CHECK_THROWS_AS(parse_config("[train]\nnot_a_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\nsteps = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[loss]\nalpha_adv = -3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("steps = 5\n"), ConfigError);  // key before any section
    Config ok = parse_config("# comment\n[train]\nsteps = 5\n");
    CHECK(ok.train.steps == 5);
}

TEST_CASE("image files round-trip at 8-bit precision") {
    TempDir tmp;
    Scene s = generate_scene(3, SceneSpec{});
    const std::string path = tmp.path("scene.pgm");
    write_image(path, s.image());
    Tensor back = read_image(path);
    REQUIRE(back.shape() == s.image().shape());
    for (std::size_t i = 0; i < back.size(); ++i)
        CHECK(std::abs(back[i] - s.image()[i]) <= 0.5 / 255.0 + 1e-12);
    // A second write-read is byte-stable.
    write_image(tmp.path("again.pgm"), back);
    CHECK(read_file(tmp.path("again.pgm")) == read_file(path));
}

TEST_CASE("annotations round-trip through the sidecar format") {
    TempDir tmp;
    std::vector<Instance> instances = {
        {2, Box{4, 5, 12, 12}},
        {0, Box{20.25, 1.5, 8, 9}},
    };
    write_annotations(tmp.path("ann.txt"), instances);
    auto back = read_annotations(tmp.path("ann.txt"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].category == 2);
    CHECK(back[0].box.x == 4.0);
    CHECK(back[1].box.x == doctest::Approx(20.25));
    CHECK(back[1].box.h == doctest::Approx(9.0));
}

TEST_CASE("heat maps round-trip through the text matrix format") {
    TempDir tmp;
    HeatMap map(5, 7);
    Rng rng(9);
    for (auto& s : map.scores) s = rng.uniform();
    write_heatmap_text(tmp.path("heat.txt"), map);
    HeatMap back = read_heatmap_text(tmp.path("heat.txt"));
    REQUIRE(back.height == 5);
    REQUIRE(back.width == 7);
    for (std::size_t i = 0; i < map.scores.size(); ++i)
        CHECK(back.scores[i] == doctest::Approx(map.scores[i]).epsilon(1e-8));
}

TEST_CASE("checkpoints restore bit-identical forward passes") {
    TempDir tmp;
    Config cfg = small_config();
    TrainResult r = train(cfg.train);
    Checkpoint ckpt;
    ckpt.step = r.state.step;
    ckpt.mode = cfg.train.mode;
    ckpt.config = cfg;
    ckpt.rng_state = r.state.rng.state();
    ckpt.nets = r.nets;
    ckpt.opt_eg = r.state.opt_eg;
    ckpt.opt_d = r.state.opt_d;

    Scene s = generate_scene(5, cfg.train.scene_for_mode());
    Tensor before = encode_image(r.nets.encoder, s.image(), false);

    save_checkpoint(tmp.path("a.ckpt"), ckpt);
    Checkpoint back = load_checkpoint(tmp.path("a.ckpt"));
    Tensor after = encode_image(back.nets.encoder, s.image(), false);
    REQUIRE(before.size() == after.size());
    CHECK(std::memcmp(before.values().data(), after.values().data(),
                      before.size() * sizeof(double)) == 0);
    CHECK(back.step == ckpt.step);
    CHECK(back.opt_eg.step == ckpt.opt_eg.step);
    CHECK(back.opt_eg.m.size() == ckpt.opt_eg.m.size());

    // Serialization itself is deterministic.
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));
}

TEST_CASE("corrupted and truncated checkpoints are rejected before use") {
    TempDir tmp;
    Config cfg = small_config();
    TrainResult r = train(cfg.train);
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.nets = r.nets;
    ckpt.opt_eg = r.state.opt_eg;
    ckpt.opt_d = r.state.opt_d;
    const std::string bytes = serialize_checkpoint(ckpt);

    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)),
                    CorruptionError);

    std::string flipped = bytes;
    flipped[flipped.size() - 3] ^= 0x40;
    CHECK_THROWS_AS(deserialize_checkpoint(flipped), CorruptionError);

    std::string wrong_version = bytes;
    wrong_version[8] = 9;  // version field follows the 8-byte magic
    CHECK_THROWS_AS(deserialize_checkpoint(wrong_version), VersionError);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CorruptionError);
}

TEST_CASE("shared encoder arrays are stored once with alias records") {
    Config cfg = small_config();
    TrainResult r = train(cfg.train);
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.nets = r.nets;
    ckpt.opt_eg = r.state.opt_eg;
    ckpt.opt_d = r.state.opt_d;
    const std::string bytes = serialize_checkpoint(ckpt);

    auto count = [&](const std::string& needle) {
        int n = 0;
        for (std::size_t pos = bytes.find(needle); pos != std::string::npos;
             pos = bytes.find(needle, pos + 1))
            ++n;
        return n;
    };
    // One stored array plus one alias-target reference; the ranking alias
    // names appear exactly once.
    CHECK(count("encoder.conv1.w") == 2);
    CHECK(count("ranking.conv1.w") == 1);
    CHECK(count("ranking.fc_vis.w") == 1);
}

TEST_CASE("detector files round-trip") {
    TempDir tmp;
    SceneSpec spec;
    PseudoGT pseudo;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Scene s = generate_scene(seed, spec);
        PseudoScene ps{s.image(), {}};
        for (const auto& inst : s.boxes()) ps.boxes.push_back(inst);
        pseudo.push_back(ps);
    }
    DetectorConfig dc;
    dc.steps = 30;
    Detector det = train_detector(pseudo, dc, ProposalConfig{}, 5, 16, 1, 1);
    save_detector(tmp.path("det.ckpt"), det);
    Detector back = load_detector(tmp.path("det.ckpt"));
    Tensor crop = Tensor::full({1, 16, 16}, 0.4);
    Tensor a = det.scores(crop, false);
    Tensor b = back.scores(crop, false);
    CHECK(std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0);

    std::string corrupt = read_file(tmp.path("det.ckpt"));
    corrupt[corrupt.size() - 1] ^= 1;
    atomic_write_file(tmp.path("bad.ckpt"), corrupt);
    CHECK_THROWS_AS(load_detector(tmp.path("bad.ckpt")), CorruptionError);
}

TEST_CASE("atomic writes leave no temp files behind") {
    TempDir tmp;
    atomic_write_file(tmp.path("x.txt"), "payload");
    CHECK(read_file(tmp.path("x.txt")) == "payload");
    CHECK(!fs::exists(tmp.path("x.txt.tmp")));
}
