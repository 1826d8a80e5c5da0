#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egoseg/augment.hpp"
#include "egoseg/benchmark.hpp"
#include "egoseg/chromakey.hpp"
#include "egoseg/matting.hpp"
#include "egoseg/net/adam.hpp"
#include "egoseg/net/model.hpp"
#include "egoseg/rng.hpp"

namespace egoseg {

inline constexpr const char* kToolkitVersion = "1.0.0";

struct BenchmarkSettings {
    int warmup = 10;
    int iters = 50;
    std::vector<Resolution> resolutions = table2_resolutions();
    std::string environment;
};

/// Every knob of the toolkit in one JSON document. All fields are optional; unknown keys are
/// rejected so typos fail loudly.
struct ToolkitConfig {
    ChromaRange chroma = default_green_range();
    std::vector<ChromaRange> skin = default_skin_ranges();
    StructuringElement trimap{5, SeShape::Square};
    MattingParams matting;
    net::NetConfig net;
    net::TrainConfig train;
    AugmentConfig augment;
    BenchmarkSettings bench;
    std::uint64_t seed = 0;
};

namespace cfgdetail {

using nlohmann::json;

class Section {
public:
    Section(const json& j, std::string path, std::initializer_list<const char*> keys) : j_(j), path_(std::move(path)) {
        require(j.is_object(), ErrorKind::InvalidArgument, "config: '" + path_ + "' must be an object");
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            require(allowed.count(it.key()) != 0, ErrorKind::InvalidArgument,
                    "config: unknown key '" + qualify(it.key()) + "'");
    }

    template <class V>
    void get(const char* key, V& out) const {
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<V>();
        } catch (const json::exception& e) {
            fail(ErrorKind::InvalidArgument, "config: '" + qualify(key) + "' has the wrong type (" + e.what() + ")");
        }
    }
    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) const { return j_.at(key); }
    std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
};

inline ChromaRange read_range(const json& j, const std::string& path, ChromaRange r) {
    Section s(j, path, {"hue_min", "hue_max", "sat_min", "sat_max", "val_min", "val_max"});
    s.get("hue_min", r.hue_min);
    s.get("hue_max", r.hue_max);
    s.get("sat_min", r.sat_min);
    s.get("sat_max", r.sat_max);
    s.get("val_min", r.val_min);
    s.get("val_max", r.val_max);
    r.validate();
    return r;
}

inline json range_json(const ChromaRange& r) {
    return {{"hue_min", r.hue_min}, {"hue_max", r.hue_max}, {"sat_min", r.sat_min},
            {"sat_max", r.sat_max}, {"val_min", r.val_min}, {"val_max", r.val_max}};
}

inline Resolution parse_resolution(const std::string& s) {
    int w = 0, h = 0;
    char x = 0, extra = 0;
    std::istringstream in(s);
    require((in >> w >> x >> h) && (x == 'x' || x == 'X') && !(in >> extra) && w > 0 && h > 0, ErrorKind::InvalidArgument,
            "resolution '" + s + "' must look like 640x480");
    return {w, h};
}

} // namespace cfgdetail

inline Resolution parse_resolution(const std::string& s) { return cfgdetail::parse_resolution(s); }

inline ToolkitConfig config_from_json(const nlohmann::json& j) {
    using cfgdetail::Section;
    ToolkitConfig c;
    Section top(j, "", {"chroma", "skin", "trimap", "matting", "net", "train", "augment", "benchmark", "seed"});
    top.get("seed", c.seed);
    if (top.has("chroma")) c.chroma = cfgdetail::read_range(top.at("chroma"), "chroma", c.chroma);
    if (top.has("skin")) {
        const auto& arr = top.at("skin");
        require(arr.is_array() && !arr.empty(), ErrorKind::InvalidArgument, "config: 'skin' must be a non-empty list of ranges");
        c.skin.clear();
        for (std::size_t i = 0; i < arr.size(); ++i)
            c.skin.push_back(cfgdetail::read_range(arr[i], "skin[" + std::to_string(i) + "]", ChromaRange{}));
    }
    if (top.has("trimap")) {
        Section s(top.at("trimap"), "trimap", {"radius", "shape"});
        int radius = c.trimap.radius;
        std::string shape = c.trimap.shape == SeShape::Square ? "square" : "disc";
        s.get("radius", radius);
        s.get("shape", shape);
        require(shape == "square" || shape == "disc", ErrorKind::InvalidArgument, "config: trimap.shape must be square or disc");
        c.trimap = StructuringElement(radius, shape == "square" ? SeShape::Square : SeShape::Disc);
    }
    if (top.has("matting")) {
        Section s(top.at("matting"), "matting",
                  {"ray_count", "search_step", "max_search", "color_weight", "distance_weight", "refine_window",
                   "smooth_radius", "expansion_radius", "expansion_color_threshold", "confidence_lambda",
                   "smooth_color_sigma"});
        auto& m = c.matting;
        s.get("ray_count", m.ray_count);
        s.get("search_step", m.search_step);
        s.get("max_search", m.max_search);
        s.get("color_weight", m.color_weight);
        s.get("distance_weight", m.distance_weight);
        s.get("refine_window", m.refine_window);
        s.get("smooth_radius", m.smooth_radius);
        s.get("expansion_radius", m.expansion_radius);
        s.get("expansion_color_threshold", m.expansion_color_threshold);
        s.get("confidence_lambda", m.confidence_lambda);
        s.get("smooth_color_sigma", m.smooth_color_sigma);
        m.validate();
    }
    if (top.has("net")) {
        Section s(top.at("net"), "net",
                  {"stem_channels", "stage_channels", "ppm_factors", "num_classes", "skip_stem", "skip_stage1",
                   "skip_stage2", "input_h", "input_w", "ppm_pool"});
        auto& n = c.net;
        s.get("stem_channels", n.stem_channels);
        s.get("stage_channels", n.stage_channels);
        s.get("ppm_factors", n.ppm_factors);
        s.get("num_classes", n.num_classes);
        s.get("skip_stem", n.skip_stem);
        s.get("skip_stage1", n.skip_stage1);
        s.get("skip_stage2", n.skip_stage2);
        s.get("input_h", n.input_h);
        s.get("input_w", n.input_w);
        std::string pool = n.ppm_pool == net::PoolKind::Average ? "avg" : "max";
        s.get("ppm_pool", pool);
        require(pool == "avg" || pool == "max", ErrorKind::InvalidArgument, "config: net.ppm_pool must be avg or max");
        n.ppm_pool = pool == "avg" ? net::PoolKind::Average : net::PoolKind::Max;
    }
    c.net.validate();
    if (top.has("train")) {
        Section s(top.at("train"), "train",
                  {"learning_rate", "weight_decay", "batch_size", "beta1", "beta2", "eps", "class_weights", "max_steps",
                   "checkpoint_every", "seed"});
        auto& t = c.train;
        s.get("learning_rate", t.learning_rate);
        s.get("weight_decay", t.weight_decay);
        s.get("batch_size", t.batch_size);
        s.get("beta1", t.beta1);
        s.get("beta2", t.beta2);
        s.get("eps", t.eps);
        s.get("class_weights", t.class_weights);
        s.get("max_steps", t.max_steps);
        s.get("checkpoint_every", t.checkpoint_every);
        s.get("seed", t.seed);
    }
    c.train.validate(c.net.num_classes);
    if (top.has("augment")) {
        Section s(top.at("augment"), "augment",
                  {"enable_chromatic", "enable_crop", "brightness_delta", "contrast_min", "contrast_max", "saturation_min",
                   "saturation_max", "hue_delta_deg", "crop_fraction", "seed"});
        auto& a = c.augment;
        s.get("enable_chromatic", a.enable_chromatic);
        s.get("enable_crop", a.enable_crop);
        s.get("brightness_delta", a.brightness_delta);
        s.get("contrast_min", a.contrast_min);
        s.get("contrast_max", a.contrast_max);
        s.get("saturation_min", a.saturation_min);
        s.get("saturation_max", a.saturation_max);
        s.get("hue_delta_deg", a.hue_delta_deg);
        s.get("crop_fraction", a.crop_fraction);
        s.get("seed", a.seed);
    }
    c.augment.validate();
    if (top.has("benchmark")) {
        Section s(top.at("benchmark"), "benchmark", {"warmup", "iters", "resolutions", "environment"});
        s.get("warmup", c.bench.warmup);
        s.get("iters", c.bench.iters);
        s.get("environment", c.bench.environment);
        if (s.has("resolutions")) {
            std::vector<std::string> rs;
            s.get("resolutions", rs);
            c.bench.resolutions.clear();
            for (const auto& r : rs) c.bench.resolutions.push_back(parse_resolution(r));
        }
        require(c.bench.iters >= 10 && c.bench.warmup >= 0, ErrorKind::InvalidArgument,
                "config: benchmark.iters must be >= 10 and warmup >= 0");
    }
    return c;
}

inline nlohmann::json to_json(const ToolkitConfig& c) {
    nlohmann::json skin = nlohmann::json::array();
    for (const auto& r : c.skin) skin.push_back(cfgdetail::range_json(r));
    const auto& m = c.matting;
    const auto& n = c.net;
    const auto& t = c.train;
    const auto& a = c.augment;
    std::vector<std::string> res;
    for (const auto& r : c.bench.resolutions) res.push_back(r.str());
    return {
        {"seed", c.seed},
        {"chroma", cfgdetail::range_json(c.chroma)},
        {"skin", skin},
        {"trimap", {{"radius", c.trimap.radius}, {"shape", c.trimap.shape == SeShape::Square ? "square" : "disc"}}},
        {"matting",
         {{"ray_count", m.ray_count}, {"search_step", m.search_step}, {"max_search", m.max_search},
          {"color_weight", m.color_weight}, {"distance_weight", m.distance_weight}, {"refine_window", m.refine_window},
          {"smooth_radius", m.smooth_radius}, {"expansion_radius", m.expansion_radius},
          {"expansion_color_threshold", m.expansion_color_threshold}, {"confidence_lambda", m.confidence_lambda},
          {"smooth_color_sigma", m.smooth_color_sigma}}},
        {"net",
         {{"stem_channels", n.stem_channels}, {"stage_channels", n.stage_channels}, {"ppm_factors", n.ppm_factors},
          {"num_classes", n.num_classes}, {"skip_stem", n.skip_stem}, {"skip_stage1", n.skip_stage1},
          {"skip_stage2", n.skip_stage2}, {"input_h", n.input_h}, {"input_w", n.input_w},
          {"ppm_pool", n.ppm_pool == net::PoolKind::Average ? "avg" : "max"}}},
        {"train",
         {{"learning_rate", t.learning_rate}, {"weight_decay", t.weight_decay}, {"batch_size", t.batch_size},
          {"beta1", t.beta1}, {"beta2", t.beta2}, {"eps", t.eps}, {"class_weights", t.class_weights},
          {"max_steps", t.max_steps}, {"checkpoint_every", t.checkpoint_every}, {"seed", t.seed}}},
        {"augment",
         {{"enable_chromatic", a.enable_chromatic}, {"enable_crop", a.enable_crop}, {"brightness_delta", a.brightness_delta},
          {"contrast_min", a.contrast_min}, {"contrast_max", a.contrast_max}, {"saturation_min", a.saturation_min},
          {"saturation_max", a.saturation_max}, {"hue_delta_deg", a.hue_delta_deg}, {"crop_fraction", a.crop_fraction},
          {"seed", a.seed}}},
        {"benchmark",
         {{"warmup", c.bench.warmup}, {"iters", c.bench.iters}, {"resolutions", res}, {"environment", c.bench.environment}}},
    };
}

inline ToolkitConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    require(f.good(), ErrorKind::Io, "cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

/// Hash of the effective configuration (canonical JSON dump), hex encoded.
inline std::string config_hash(const ToolkitConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
    return buf;
}

} // namespace egoseg
