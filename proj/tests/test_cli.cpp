// Smoke tests for the command-line surface. The binary path arrives via the
// RANKGAN_CLI environment variable (set by ctest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "rankgan/image_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* env = std::getenv("RANKGAN_CLI");
    REQUIRE_MESSAGE(env != nullptr, "RANKGAN_CLI must point at the built binary");
    return env;
}

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() /
              ("rankgan_cli_" + std::to_string(static_cast<unsigned>(std::rand())));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

const char* kSmallConfig =
    "[scene]\n"
    "image_size = 16\n"
    "max_objects = 2\n"
    "[net]\n"
    "patch_size = 8\n"
    "d_vis = 12\n"
    "d_loc = 4\n"
    "enc_c1 = 2\nenc_c2 = 3\nenc_c3 = 4\n"
    "gen_fc1 = 8\ngen_c0 = 4\ngen_c1 = 3\ngen_c2 = 2\n"
    "[train]\n"
    "steps = 3\n"
    "batch = 2\n"
    "pretrain_steps = 0\n"
    "gen_pretrain_steps = 0\n"
    "dataset_scenes = 5\n"
    "[detector]\n"
    "steps = 20\n"
    "[eval]\n"
    "eval_scenes = 3\n";

}  // namespace

TEST_CASE("help and dump-config exit cleanly") {
    CHECK(run("--help") == 0);
    CHECK(run("--dump-config") == 0);
}

TEST_CASE("bad flags and bad configs produce non-zero exits") {
    CHECK(run("no-such-subcommand") != 0);
    TempDir tmp;
    rankgan::atomic_write_file(tmp.path("bad.cfg"), "[train]\nbogus = 1\n");
    CHECK(run("--config " + tmp.path("bad.cfg") + " gen-data --out " + tmp.path("o")) != 0);
}

TEST_CASE("train with zero steps writes an initialization checkpoint") {
    TempDir tmp;
    rankgan::atomic_write_file(tmp.path("small.cfg"), kSmallConfig);
    const std::string base =
        "--config " + tmp.path("small.cfg") + " --out " + tmp.path("out");
    CHECK(run(base + " train --steps 0") == 0);
    CHECK(fs::exists(tmp.path("out/final.ckpt")));
    CHECK(fs::exists(tmp.path("out/train.log")));

    // Overwrite protection without --force.
    CHECK(run(base + " train --steps 0") != 0);
    CHECK(run(base + " --force train --steps 0") == 0);
}

TEST_CASE("the full pipeline runs end to end at toy scale") {
    TempDir tmp;
    rankgan::atomic_write_file(tmp.path("small.cfg"), kSmallConfig);
    const std::string base =
        "--config " + tmp.path("small.cfg") + " --out " + tmp.path("out");
    CHECK(run(base + " gen-data") == 0);
    CHECK(fs::exists(tmp.path("out/scenes_train/scene_0000.pgm")));
    CHECK(fs::exists(tmp.path("out/scenes_train/scene_0000.txt")));
    CHECK(run(base + " train") == 0);
    CHECK(run(base + " synth --ckpt " + tmp.path("out/final.ckpt")) == 0);
    CHECK(fs::exists(tmp.path("out/synth.pgm")));
    CHECK(fs::exists(tmp.path("out/synth_metrics.txt")));
    CHECK(run(base + " discover --ckpt " + tmp.path("out/final.ckpt")) == 0);
    CHECK(fs::exists(tmp.path("out/pseudo/scene_0000.txt")));
    CHECK(run(base + " train-detector --ckpt " + tmp.path("out/final.ckpt")) == 0);
    CHECK(fs::exists(tmp.path("out/detector.ckpt")));
    CHECK(run(base + " eval") == 0);
    CHECK(fs::exists(tmp.path("out/results.txt")));
    CHECK(fs::exists(tmp.path("out/results.kv")));
}

TEST_CASE("weak gen-data hides boxes and exports label files") {
    TempDir tmp;
    std::string weak_cfg = std::string(kSmallConfig) + "[train]\nmode = weak\n";
    rankgan::atomic_write_file(tmp.path("weak.cfg"), weak_cfg);
    CHECK(run("--config " + tmp.path("weak.cfg") + " --out " + tmp.path("out") +
              " gen-data") == 0);
    CHECK(fs::exists(tmp.path("out/scenes_train/scene_0000.pgm")));
    CHECK(fs::exists(tmp.path("out/scenes_train/scene_0000.labels")));
    CHECK(!fs::exists(tmp.path("out/scenes_train/scene_0000.txt")));
}
