#include "sadm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sadm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad numeric value '" + v + "' for " + key);
    }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::invalid_argument("config: bad integer value '" + v + "' for " + key);
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad boolean value '" + v + "' for " + key);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.seed = static_cast<std::uint64_t>(parse_int(v, k));
         }},
        {"data.subjects", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.data_subjects = static_cast<int>(parse_int(v, k));
         }},
        {"data.frames", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.data_frames = static_cast<int>(parse_int(v, k));
         }},
        {"data.W", [](RunConfig& c, const std::string& v, const std::string& k) { c.extents[0] = parse_int(v, k); }},
        {"data.H", [](RunConfig& c, const std::string& v, const std::string& k) { c.extents[1] = parse_int(v, k); }},
        {"data.D", [](RunConfig& c, const std::string& v, const std::string& k) { c.extents[2] = parse_int(v, k); }},
        {"schedule.lambda_min", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.schedule.lambda_min = parse_double(v, k);
         }},
        {"schedule.lambda_max", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.schedule.lambda_max = parse_double(v, k);
         }},
        {"schedule.T", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.schedule.T = static_cast<int>(parse_int(v, k));
         }},
        {"attn.dim", [](RunConfig& c, const std::string& v, const std::string& k) { c.attn.dim = parse_int(v, k); }},
        {"attn.heads", [](RunConfig& c, const std::string& v, const std::string& k) { c.attn.heads = parse_int(v, k); }},
        {"attn.blocks", [](RunConfig& c, const std::string& v, const std::string& k) { c.attn.blocks = parse_int(v, k); }},
        {"attn.window_w", [](RunConfig& c, const std::string& v, const std::string& k) { c.attn.window[0] = parse_int(v, k); }},
        {"attn.window_h", [](RunConfig& c, const std::string& v, const std::string& k) { c.attn.window[1] = parse_int(v, k); }},
        {"attn.window_d", [](RunConfig& c, const std::string& v, const std::string& k) { c.attn.window[2] = parse_int(v, k); }},
        {"attn.proj_kernel", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.attn.proj_kernel = parse_int(v, k);
         }},
        {"denoiser.base", [](RunConfig& c, const std::string& v, const std::string& k) { c.denoiser.base = parse_int(v, k); }},
        {"denoiser.depth", [](RunConfig& c, const std::string& v, const std::string& k) { c.denoiser.depth = parse_int(v, k); }},
        {"denoiser.lambda_embed", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.denoiser.lambda_embed = parse_int(v, k);
         }},
        {"denoiser.bounded_x_head", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.denoiser.bounded_x_head = parse_bool(v, k);
         }},
        {"train.steps", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.steps = static_cast<int>(parse_int(v, k));
         }},
        {"train.pretrain_steps", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.pretrain_steps = static_cast<int>(parse_int(v, k));
         }},
        {"train.pretrain_lr", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.pretrain_lr = parse_double(v, k);
         }},
        {"train.freeze_conditioner", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.freeze_conditioner = parse_bool(v, k);
         }},
        {"train.augment", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.augment = parse_bool(v, k);
         }},
        {"train.pretrain_augment", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.pretrain_augment = parse_bool(v, k);
         }},
        {"train.lr", [](RunConfig& c, const std::string& v, const std::string& k) { c.train.lr = parse_double(v, k); }},
        {"train.p_uncond", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.p_uncond = parse_double(v, k);
         }},
        {"train.batch", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.batch = static_cast<int>(parse_int(v, k));
         }},
        {"train.ckpt_every", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.ckpt_every = static_cast<int>(parse_int(v, k));
         }},
        {"train.plain_gradient", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.plain_gradient = parse_bool(v, k);
         }},
        {"sample.T", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.sample.T = static_cast<int>(parse_int(v, k));
         }},
        {"sample.w", [](RunConfig& c, const std::string& v, const std::string& k) { c.sample.w = parse_double(v, k); }},
        {"sample.v", [](RunConfig& c, const std::string& v, const std::string& k) { c.sample.v = parse_double(v, k); }},
        {"sample.final_step_noise", [](RunConfig& c, const std::string& v, const std::string& k) {
             c.sample.final_step_noise = parse_bool(v, k);
         }},
    };
    return table;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.frame_shape = extents;
    mc.l_max = data_frames;
    mc.schedule = schedule;
    mc.attn = attn;
    mc.denoiser = denoiser;
    return mc;
}

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            throw std::invalid_argument("config: unknown key '" + key + "' at line " + std::to_string(lineno));
        it->second(cfg, val, key);
    }
    cfg.sample.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_text(text);
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    os.precision(17);
    os << "seed = " << seed << '\n';
    os << "data.subjects = " << data_subjects << '\n';
    os << "data.frames = " << data_frames << '\n';
    os << "data.W = " << extents[0] << '\n';
    os << "data.H = " << extents[1] << '\n';
    os << "data.D = " << extents[2] << '\n';
    os << "schedule.lambda_min = " << schedule.lambda_min << '\n';
    os << "schedule.lambda_max = " << schedule.lambda_max << '\n';
    os << "schedule.T = " << schedule.T << '\n';
    os << "attn.dim = " << attn.dim << '\n';
    os << "attn.heads = " << attn.heads << '\n';
    os << "attn.blocks = " << attn.blocks << '\n';
    os << "attn.window_w = " << attn.window[0] << '\n';
    os << "attn.window_h = " << attn.window[1] << '\n';
    os << "attn.window_d = " << attn.window[2] << '\n';
    os << "attn.proj_kernel = " << attn.proj_kernel << '\n';
    os << "denoiser.base = " << denoiser.base << '\n';
    os << "denoiser.depth = " << denoiser.depth << '\n';
    os << "denoiser.lambda_embed = " << denoiser.lambda_embed << '\n';
    os << "denoiser.bounded_x_head = " << (denoiser.bounded_x_head ? "true" : "false") << '\n';
    os << "train.steps = " << train.steps << '\n';
    os << "train.pretrain_steps = " << train.pretrain_steps << '\n';
    os << "train.pretrain_lr = " << train.pretrain_lr << '\n';
    os << "train.freeze_conditioner = " << (train.freeze_conditioner ? "true" : "false") << '\n';
    os << "train.augment = " << (train.augment ? "true" : "false") << '\n';
    os << "train.pretrain_augment = " << (train.pretrain_augment ? "true" : "false") << '\n';
    os << "train.lr = " << train.lr << '\n';
    os << "train.p_uncond = " << train.p_uncond << '\n';
    os << "train.batch = " << train.batch << '\n';
    os << "train.ckpt_every = " << train.ckpt_every << '\n';
    os << "train.plain_gradient = " << (train.plain_gradient ? "true" : "false") << '\n';
    os << "sample.T = " << sample.T << '\n';
    os << "sample.w = " << sample.w << '\n';
    os << "sample.v = " << sample.v << '\n';
    os << "sample.final_step_noise = " << (sample.final_step_noise ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace sadm
