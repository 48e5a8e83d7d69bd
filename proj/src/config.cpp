#include "rankgan/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace rankgan {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

double parse_double(const std::string& s, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config: bad number '" + s + "' for " + key);
    return v;
}

long long parse_int(const std::string& s, const std::string& key) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config: bad integer '" + s + "' for " + key);
    return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("config: bad boolean '" + s + "' for " + key);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const Config&)> get;
    std::function<void(Config&, const std::string&)> set;
};

std::vector<Field> make_fields() {
    std::vector<Field> f;
    auto add_int = [&](const char* sec, const char* key, auto member) {
        f.push_back({sec, key,
                     [member](const Config& c) { return std::to_string(member(const_cast<Config&>(c))); },
                     [member, key = std::string(key)](Config& c, const std::string& v) {
                         member(c) = static_cast<int>(parse_int(v, key));
                     }});
    };
    auto add_u64 = [&](const char* sec, const char* key, auto member) {
        f.push_back({sec, key,
                     [member](const Config& c) { return std::to_string(member(const_cast<Config&>(c))); },
                     [member, key = std::string(key)](Config& c, const std::string& v) {
                         member(c) = static_cast<std::uint64_t>(parse_int(v, key));
                     }});
    };
    auto add_dbl = [&](const char* sec, const char* key, auto member) {
        f.push_back({sec, key,
                     [member](const Config& c) { return fmt_double(member(const_cast<Config&>(c))); },
                     [member, key = std::string(key)](Config& c, const std::string& v) {
                         member(c) = parse_double(v, key);
                     }});
    };
    auto add_bool = [&](const char* sec, const char* key, auto member) {
        f.push_back({sec, key,
                     [member](const Config& c) { return member(const_cast<Config&>(c)) ? "true" : "false"; },
                     [member, key = std::string(key)](Config& c, const std::string& v) {
                         member(c) = parse_bool(v, key);
                     }});
    };

    // [scene]
    f.push_back({"scene", "categories",
                 [](const Config& c) {
                     std::string out;
                     for (std::size_t i = 0; i < c.train.scene.categories.size(); ++i) {
                         if (i) out += ",";
                         out += std::to_string(c.train.scene.categories[i]);
                     }
                     return out;
                 },
                 [](Config& c, const std::string& v) {
                     c.train.scene.categories.clear();
                     for (const auto& item : split_list(v))
                         c.train.scene.categories.push_back(
                             static_cast<int>(parse_int(item, "categories")));
                 }});
    add_int("scene", "max_objects", [](Config& c) -> int& { return c.train.scene.max_objects; });
    add_int("scene", "image_size", [](Config& c) -> int& { return c.train.scene.image_size; });
    add_int("scene", "channels", [](Config& c) -> int& { return c.train.scene.channels; });
    add_dbl("scene", "clutter", [](Config& c) -> double& { return c.train.scene.clutter; });
    add_dbl("scene", "rot_jitter", [](Config& c) -> double& { return c.train.scene.rot_jitter; });
    add_dbl("scene", "intensity_lo",
            [](Config& c) -> double& { return c.train.scene.intensity_lo; });
    add_dbl("scene", "intensity_hi",
            [](Config& c) -> double& { return c.train.scene.intensity_hi; });
    add_dbl("scene", "shape_jitter",
            [](Config& c) -> double& { return c.train.scene.shape_jitter; });

    // [net]
    add_int("net", "d_vis", [](Config& c) -> int& { return c.train.net.d_vis; });
    add_int("net", "d_loc", [](Config& c) -> int& { return c.train.net.d_loc; });
    add_int("net", "patch_size", [](Config& c) -> int& { return c.train.net.patch_size; });
    add_int("net", "enc_c1", [](Config& c) -> int& { return c.train.net.enc_c1; });
    add_int("net", "enc_c2", [](Config& c) -> int& { return c.train.net.enc_c2; });
    add_int("net", "enc_c3", [](Config& c) -> int& { return c.train.net.enc_c3; });
    add_int("net", "loc_c1", [](Config& c) -> int& { return c.train.net.loc_c1; });
    add_int("net", "gen_fc1", [](Config& c) -> int& { return c.train.net.gen_fc1; });
    add_int("net", "gen_c0", [](Config& c) -> int& { return c.train.net.gen_c0; });
    add_int("net", "gen_c1", [](Config& c) -> int& { return c.train.net.gen_c1; });
    add_int("net", "gen_c2", [](Config& c) -> int& { return c.train.net.gen_c2; });
    add_int("net", "disc_c1", [](Config& c) -> int& { return c.train.net.disc_c1; });
    add_int("net", "disc_c2", [](Config& c) -> int& { return c.train.net.disc_c2; });
    add_int("net", "disc_c3", [](Config& c) -> int& { return c.train.net.disc_c3; });
    add_int("net", "disc_fc", [](Config& c) -> int& { return c.train.net.disc_fc; });
    add_dbl("net", "dropout", [](Config& c) -> double& { return c.train.net.dropout_p; });
    add_bool("net", "conditional_disc",
             [](Config& c) -> bool& { return c.train.net.conditional_disc; });
    add_bool("net", "flatten_code",
             [](Config& c) -> bool& { return c.train.net.flatten_code; });

    // [loss]
    add_dbl("loss", "alpha_rank", [](Config& c) -> double& { return c.train.coeffs.rank; });
    add_dbl("loss", "alpha_img", [](Config& c) -> double& { return c.train.coeffs.img; });
    add_dbl("loss", "alpha_feat", [](Config& c) -> double& { return c.train.coeffs.feat; });
    add_dbl("loss", "alpha_adv", [](Config& c) -> double& { return c.train.coeffs.adv; });
    add_dbl("loss", "margin", [](Config& c) -> double& { return c.train.coeffs.margin; });
    add_bool("loss", "use_rank", [](Config& c) -> bool& { return c.train.use_rank; });
    add_bool("loss", "use_img", [](Config& c) -> bool& { return c.train.use_img; });
    add_bool("loss", "use_feat", [](Config& c) -> bool& { return c.train.use_feat; });
    add_bool("loss", "use_adv", [](Config& c) -> bool& { return c.train.use_adv; });

    // [train]
    f.push_back({"train", "mode",
                 [](const Config& c) { return to_string(c.train.mode); },
                 [](Config& c, const std::string& v) { c.train.mode = train_mode_from_string(v); }});
    add_int("train", "batch", [](Config& c) -> int& { return c.train.batch; });
    add_int("train", "steps", [](Config& c) -> int& { return c.train.steps; });
    add_int("train", "d_steps", [](Config& c) -> int& { return c.train.d_steps; });
    add_int("train", "k_top", [](Config& c) -> int& { return c.train.k_top; });
    add_u64("train", "seed", [](Config& c) -> std::uint64_t& { return c.train.seed; });
    add_dbl("train", "lr", [](Config& c) -> double& { return c.train.adam.lr; });
    add_dbl("train", "beta1", [](Config& c) -> double& { return c.train.adam.beta1; });
    add_dbl("train", "beta2", [](Config& c) -> double& { return c.train.adam.beta2; });
    add_dbl("train", "epsilon", [](Config& c) -> double& { return c.train.adam.epsilon; });
    add_int("train", "pretrain_steps", [](Config& c) -> int& { return c.train.pretrain_steps; });
    add_int("train", "pretrain_batch", [](Config& c) -> int& { return c.train.pretrain_batch; });
    add_dbl("train", "pretrain_lr", [](Config& c) -> double& { return c.train.pretrain_lr; });
    add_int("train", "gen_pretrain_steps",
            [](Config& c) -> int& { return c.train.gen_pretrain_steps; });
    add_int("train", "dataset_scenes", [](Config& c) -> int& { return c.train.dataset_scenes; });
    add_u64("train", "dataset_seed",
            [](Config& c) -> std::uint64_t& { return c.train.dataset_seed; });
    add_int("train", "checkpoint_every",
            [](Config& c) -> int& { return c.train.checkpoint_every; });
    add_bool("train", "update_encoder_from_rank",
             [](Config& c) -> bool& { return c.train.update_encoder_from_rank; });

    // [discovery]
    add_dbl("discovery", "cc_threshold",
            [](Config& c) -> double& { return c.discovery.cc_threshold; });
    f.push_back({"discovery", "scales",
                 [](const Config& c) {
                     std::string out;
                     for (std::size_t i = 0; i < c.discovery.scales.size(); ++i) {
                         if (i) out += ",";
                         out += fmt_double(c.discovery.scales[i]);
                     }
                     return out;
                 },
                 [](Config& c, const std::string& v) {
                     c.discovery.scales.clear();
                     for (const auto& item : split_list(v))
                         c.discovery.scales.push_back(parse_double(item, "scales"));
                 }});
    f.push_back({"discovery", "windows",
                 [](const Config& c) {
                     std::string out;
                     for (std::size_t i = 0; i < c.discovery.proposals.windows.size(); ++i) {
                         if (i) out += ",";
                         out += std::to_string(c.discovery.proposals.windows[i]);
                     }
                     return out;
                 },
                 [](Config& c, const std::string& v) {
                     c.discovery.proposals.windows.clear();
                     for (const auto& item : split_list(v))
                         c.discovery.proposals.windows.push_back(
                             static_cast<int>(parse_int(item, "windows")));
                 }});
    add_int("discovery", "stride",
            [](Config& c) -> int& { return c.discovery.proposals.stride; });
    add_int("discovery", "max_instances",
            [](Config& c) -> int& { return c.discovery.max_instances; });
    add_dbl("discovery", "center_dilate",
            [](Config& c) -> double& { return c.discovery.center_dilate; });

    // [detector]
    add_int("detector", "steps", [](Config& c) -> int& { return c.detector.steps; });
    add_int("detector", "batch", [](Config& c) -> int& { return c.detector.batch; });
    add_dbl("detector", "lr", [](Config& c) -> double& { return c.detector.lr; });
    add_int("detector", "hidden", [](Config& c) -> int& { return c.detector.hidden; });
    add_dbl("detector", "nms_iou", [](Config& c) -> double& { return c.detector.nms_iou; });
    add_dbl("detector", "score_threshold",
            [](Config& c) -> double& { return c.detector.score_threshold; });
    add_dbl("detector", "pos_iou", [](Config& c) -> double& { return c.detector.pos_iou; });
    add_dbl("detector", "neg_iou", [](Config& c) -> double& { return c.detector.neg_iou; });

    // [eval]
    add_int("eval", "eval_scenes", [](Config& c) -> int& { return c.eval.eval_scenes; });
    add_u64("eval", "eval_seed", [](Config& c) -> std::uint64_t& { return c.eval.eval_seed; });
    add_dbl("eval", "iou_threshold", [](Config& c) -> double& { return c.eval.iou_threshold; });
    add_int("eval", "corloc_scenes", [](Config& c) -> int& { return c.eval.corloc_scenes; });
    add_u64("eval", "corloc_seed",
            [](Config& c) -> std::uint64_t& { return c.eval.corloc_seed; });
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = make_fields();
    return f;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Keeps derived values consistent after parsing.
void fixup(Config& cfg) {
    cfg.train.net.scene_size = cfg.train.scene.image_size;
    cfg.train.net.in_channels = cfg.train.scene.channels;
    cfg.train.net.categories =
        std::max(2, static_cast<int>(cfg.train.scene.categories.size()));
}

}  // namespace

void Config::validate() const {
    train.validate();
    if (!(discovery.cc_threshold > 0.0 && discovery.cc_threshold <= 1.0))
        throw ConfigError("discovery: cc_threshold must lie in (0,1]");
    if (discovery.scales.empty()) throw ConfigError("discovery: scales must be non-empty");
    if (detector.steps < 1 || detector.batch < 1 || detector.hidden < 1)
        throw ConfigError("detector: steps, batch and hidden must be >= 1");
    if (eval.eval_scenes < 1 || eval.corloc_scenes < 1)
        throw ConfigError("eval: scene counts must be >= 1");
}

Config default_config() {
    Config cfg;
    fixup(cfg);
    return cfg;
}

Config parse_config(const std::string& text) {
    Config cfg = default_config();
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config: bad section header at line " + std::to_string(lineno));
            section = t.substr(1, t.size() - 2);
            bool known = false;
            for (const auto& f : fields()) known = known || f.section == section;
            if (!known) throw ConfigError("config: unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected 'key = value' at line " + std::to_string(lineno));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const Field* field = nullptr;
        for (const auto& f : fields())
            if (f.section == section && f.key == key) field = &f;
        if (!field)
            throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
        field->set(cfg, value);
    }
    fixup(cfg);
    cfg.validate();
    return cfg;
}

Config parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const Config& cfg) {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            if (!out.empty()) out += "\n";
            out += "[" + f.section + "]\n";
            section = f.section;
        }
        out += f.key + " = " + f.get(cfg) + "\n";
    }
    return out;
}

}  // namespace rankgan
