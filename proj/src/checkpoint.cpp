#include "rankgan/checkpoint.hpp"

#include <cstring>
#include <map>

#include "rankgan/image_io.hpp"

namespace rankgan {

namespace {

constexpr char kMagic[8] = {'R', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

struct Writer {
    std::string out;

    void u8(std::uint8_t v) { out.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out += s;
    }
    void f64_array(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
};

struct Reader {
    const std::string& in;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > in.size()) throw CorruptionError("checkpoint: truncated data");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = in.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<double> f64_array() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
};

void write_adam(Writer& w, const AdamState& st) {
    w.u64(st.step);
    w.f64(st.cfg.lr);
    w.f64(st.cfg.beta1);
    w.f64(st.cfg.beta2);
    w.f64(st.cfg.epsilon);
    w.u32(static_cast<std::uint32_t>(st.m.size()));
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        w.f64_array(st.m[i]);
        w.f64_array(st.v[i]);
    }
}

AdamState read_adam(Reader& r) {
    AdamState st;
    st.step = r.u64();
    st.cfg.lr = r.f64();
    st.cfg.beta1 = r.f64();
    st.cfg.beta2 = r.f64();
    st.cfg.epsilon = r.f64();
    const std::uint32_t n = r.u32();
    st.m.resize(n);
    st.v.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        st.m[i] = r.f64_array();
        st.v[i] = r.f64_array();
    }
    return st;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t crc = 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    Writer payload;
    payload.u64(ckpt.step);
    payload.u8(ckpt.mode == TrainMode::weak ? 1 : 0);
    for (std::uint64_t wrd : ckpt.rng_state) payload.u64(wrd);
    payload.str(serialize_config(ckpt.config));

    // Stored arrays: each parameter once, then alias records for the
    // ranking network, which shares encoder storage.
    auto named = ckpt.nets.named_params();
    payload.u32(static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, tensor] : named) {
        payload.str(name);
        payload.u8(static_cast<std::uint8_t>(tensor.shape().size()));
        for (int d : tensor.shape()) payload.u32(static_cast<std::uint32_t>(d));
        payload.f64_array(tensor.values());
    }
    std::vector<std::pair<std::string, std::string>> aliases;
    for (const auto& [name, tensor] : ckpt.nets.encoder.named_params())
        aliases.emplace_back("ranking." + name.substr(std::string("encoder.").size()), name);
    payload.u32(static_cast<std::uint32_t>(aliases.size()));
    for (const auto& [alias, target] : aliases) {
        payload.str(alias);
        payload.str(target);
    }

    write_adam(payload, ckpt.opt_eg);
    write_adam(payload, ckpt.opt_d);

    Writer out;
    out.out.assign(kMagic, sizeof(kMagic));
    out.u32(Checkpoint::kVersion);
    out.u32(crc32(payload.out.data(), payload.out.size()));
    out.u64(payload.out.size());
    out.out += payload.out;
    return out.out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic) + 16 ||
        std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw CorruptionError("checkpoint: bad magic");
    Reader header{bytes, sizeof(kMagic)};
    const std::uint32_t version = header.u32();
    if (version != Checkpoint::kVersion)
        throw VersionError("checkpoint: version " + std::to_string(version) +
                           " unsupported (expected " + std::to_string(Checkpoint::kVersion) +
                           ")");
    const std::uint32_t stored_crc = header.u32();
    const std::uint64_t payload_len = header.u64();
    if (header.pos + payload_len != bytes.size())
        throw CorruptionError("checkpoint: truncated or oversized payload");
    if (crc32(bytes.data() + header.pos, payload_len) != stored_crc)
        throw CorruptionError("checkpoint: checksum mismatch");

    Reader r{bytes, header.pos};
    Checkpoint ckpt;
    ckpt.step = r.u64();
    ckpt.mode = r.u8() == 1 ? TrainMode::weak : TrainMode::supervised;
    for (auto& wrd : ckpt.rng_state) wrd = r.u64();
    ckpt.config = parse_config(r.str());

    std::map<std::string, std::pair<Shape, std::vector<double>>> arrays;
    const std::uint32_t n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str();
        const std::uint8_t ndim = r.u8();
        Shape shape;
        for (std::uint8_t d = 0; d < ndim; ++d)
            shape.push_back(static_cast<int>(r.u32()));
        arrays[name] = {shape, r.f64_array()};
    }
    const std::uint32_t n_alias = r.u32();
    for (std::uint32_t i = 0; i < n_alias; ++i) {
        const std::string alias = r.str();
        const std::string target = r.str();
        if (!arrays.count(target))
            throw CorruptionError("checkpoint: alias '" + alias + "' targets missing array '" +
                                  target + "'");
    }

    ckpt.nets = Networks::init(ckpt.config.train.net, 0);
    for (auto& [name, tensor] : ckpt.nets.named_params()) {
        auto it = arrays.find(name);
        if (it == arrays.end())
            throw CorruptionError("checkpoint: missing array '" + name + "'");
        if (it->second.first != tensor.shape())
            throw CorruptionError("checkpoint: shape mismatch for '" + name + "'");
        Tensor t = tensor;
        t.mutable_values() = it->second.second;
    }

    ckpt.opt_eg = read_adam(r);
    ckpt.opt_d = read_adam(r);
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    atomic_write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    return deserialize_checkpoint(read_file(path));
}

namespace {
constexpr char kDetMagic[8] = {'R', 'G', 'A', 'N', 'D', 'E', 'T', '1'};
}

void save_detector(const std::string& path, const Detector& det) {
    Writer payload;
    payload.u32(static_cast<std::uint32_t>(det.patch_size));
    payload.u32(static_cast<std::uint32_t>(det.channels));
    payload.u32(static_cast<std::uint32_t>(det.categories));
    payload.u32(static_cast<std::uint32_t>(det.cfg.hidden));
    payload.f64(det.cfg.nms_iou);
    payload.f64(det.cfg.score_threshold);
    payload.u32(static_cast<std::uint32_t>(det.proposals.windows.size()));
    for (int w : det.proposals.windows) payload.u32(static_cast<std::uint32_t>(w));
    payload.u32(static_cast<std::uint32_t>(det.proposals.stride));
    for (const Tensor& t : {det.w1, det.b1, det.w2, det.b2}) payload.f64_array(t.values());

    Writer out;
    out.out.assign(kDetMagic, sizeof(kDetMagic));
    out.u32(1);
    out.u32(crc32(payload.out.data(), payload.out.size()));
    out.u64(payload.out.size());
    out.out += payload.out;
    atomic_write_file(path, out.out);
}

Detector load_detector(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < sizeof(kDetMagic) + 16 ||
        std::memcmp(bytes.data(), kDetMagic, sizeof(kDetMagic)) != 0)
        throw CorruptionError("detector: bad magic in '" + path + "'");
    Reader header{bytes, sizeof(kDetMagic)};
    const std::uint32_t version = header.u32();
    if (version != 1) throw VersionError("detector: unsupported version");
    const std::uint32_t stored_crc = header.u32();
    const std::uint64_t len = header.u64();
    if (header.pos + len != bytes.size())
        throw CorruptionError("detector: truncated payload in '" + path + "'");
    if (crc32(bytes.data() + header.pos, len) != stored_crc)
        throw CorruptionError("detector: checksum mismatch in '" + path + "'");

    Reader r{bytes, header.pos};
    Detector det;
    det.patch_size = static_cast<int>(r.u32());
    det.channels = static_cast<int>(r.u32());
    det.categories = static_cast<int>(r.u32());
    det.cfg.hidden = static_cast<int>(r.u32());
    det.cfg.nms_iou = r.f64();
    det.cfg.score_threshold = r.f64();
    const std::uint32_t nw = r.u32();
    det.proposals.windows.clear();
    for (std::uint32_t i = 0; i < nw; ++i)
        det.proposals.windows.push_back(static_cast<int>(r.u32()));
    det.proposals.stride = static_cast<int>(r.u32());
    const int in_dim = det.channels * det.patch_size * det.patch_size;
    const int classes = det.categories + 1;
    det.w1 = Tensor::parameter({det.cfg.hidden, in_dim}, r.f64_array(), "detector.fc1.w");
    det.b1 = Tensor::parameter({det.cfg.hidden}, r.f64_array(), "detector.fc1.b");
    det.w2 = Tensor::parameter({classes, det.cfg.hidden}, r.f64_array(), "detector.fc2.w");
    det.b2 = Tensor::parameter({classes}, r.f64_array(), "detector.fc2.b");
    return det;
}

}  // namespace rankgan
