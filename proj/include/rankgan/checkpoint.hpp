#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rankgan/adam.hpp"
#include "rankgan/config.hpp"
#include "rankgan/networks.hpp"

namespace rankgan {

// Versioned binary container: header (magic, version, checksum, length)
// followed by named raw arrays. The encoder/ranking weight sharing is stored
// once with explicit alias records. See FORMATS.md for the byte layout.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint64_t step = 0;
    TrainMode mode = TrainMode::supervised;
    Config config;
    std::array<std::uint64_t, 4> rng_state{};
    Networks nets;
    AdamState opt_eg;
    AdamState opt_d;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32(const void* data, std::size_t len);

// The substitute detector persists in its own small container with the same
// header discipline (magic, version, checksum).
void save_detector(const std::string& path, const Detector& det);
Detector load_detector(const std::string& path);

}  // namespace rankgan
