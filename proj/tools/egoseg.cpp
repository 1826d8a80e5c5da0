// egoseg: command-line front end over the egoseg headers.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "egoseg/benchmark.hpp"
#include "egoseg/chromakey.hpp"
#include "egoseg/config.hpp"
#include "egoseg/dataset.hpp"
#include "egoseg/labels.hpp"
#include "egoseg/matting.hpp"
#include "egoseg/metrics.hpp"
#include "egoseg/png_io.hpp"
#include "egoseg/synth.hpp"
#include "egoseg/toydata.hpp"
#include "egoseg/net/params_io.hpp"
#include "egoseg/net/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace egoseg;

namespace {

struct Globals {
    std::string config_path;
    unsigned jobs = 1;
    std::string record_path;
};

ToolkitConfig load_effective_config(const Globals& g) {
    return g.config_path.empty() ? config_from_json(json::object()) : load_config(g.config_path);
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
    ensure_parent(p);
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::Io, "cannot write '" + p.string() + "'");
    f << text;
    require(f.good(), ErrorKind::Io, "failed writing '" + p.string() + "'");
}

/// Run record: what ran and with which settings. No timestamps or output paths, so reruns into
/// a different directory produce identical records.
struct RunRecord {
    std::string command;
    json inputs = json::object();
    json seeds = json::object();
    json results = json::object();

    void write(const Globals& g, const ToolkitConfig& cfg, const fs::path& fallback) const {
        const fs::path path = g.record_path.empty() ? fallback : fs::path(g.record_path);
        json j{{"command", command},
               {"toolkit_version", kToolkitVersion},
               {"formats", {{"manifest", kManifestFormatVersion}, {"weights", net::kWeightFormatVersion}}},
               {"config_hash", config_hash(cfg)},
               {"seeds", seeds},
               {"inputs", inputs},
               {"results", results}};
        write_text(path, j.dump(2) + "\n");
    }
};

fs::path sidecar(const fs::path& output) { return fs::path(output.string() + ".run.json"); }

std::vector<fs::path> list_pngs(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    require(!out.empty(), ErrorKind::InvalidInput, "no .png files in '" + dir.string() + "'");
    return out;
}

/// Runs body(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            require(used == tok.size(), ErrorKind::InvalidArgument, "");
        } catch (...) {
            fail(ErrorKind::InvalidArgument, what + ": '" + tok + "' is not a number");
        }
    }
    require(!v.empty(), ErrorKind::InvalidArgument, what + " must list comma-separated numbers");
    return v;
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

// ---------------------------------------------------------------------------------------------
// imagecore / chromakey / matting

struct ChromaOpts {
    std::string in, out;
    bool skin = false;
};

void cmd_chroma_extract(const Globals& g, const ChromaOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const ImageRGB8 img = read_rgb(o.in);
    const BinaryMask m = o.skin ? skin_baseline_segment(img, cfg.skin) : extract_foreground_mask(img, cfg.chroma);
    write_binary_mask(o.out, m);
    RunRecord r{"chroma-extract", {{"in", o.in}, {"skin", o.skin}}};
    r.results = {{"foreground_pixels", count_ones(m)}, {"pixels", m.size()}};
    r.write(g, cfg, sidecar(o.out));
}

struct TrimapOpts {
    std::string mask, out, shape;
    int radius = 0;
};

void cmd_trimap(const Globals& g, const TrimapOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    StructuringElement se = cfg.trimap;
    if (o.radius > 0 || !o.shape.empty()) {
        require(o.shape.empty() || o.shape == "square" || o.shape == "disc", ErrorKind::InvalidArgument,
                "--shape must be square or disc");
        const SeShape shape = o.shape.empty() ? se.shape : (o.shape == "square" ? SeShape::Square : SeShape::Disc);
        se = StructuringElement(o.radius > 0 ? o.radius : se.radius, shape);
    }
    const Trimap t = make_trimap(read_binary_mask(o.mask), se);
    write_trimap(o.out, t);
    const TrimapCounts c = count_states(t);
    RunRecord r{"trimap", {{"mask", o.mask}, {"radius", se.radius}, {"shape", se.shape == SeShape::Square ? "square" : "disc"}}};
    r.results = {{"foreground", c.foreground}, {"background", c.background}, {"unknown", c.unknown}};
    r.write(g, cfg, sidecar(o.out));
}

struct MatteOpts {
    std::string image, trimap, out;
};

void cmd_matte(const Globals& g, const MatteOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const AlphaMask a = shared_sampling_matte(read_rgb(o.image), read_trimap(o.trimap), cfg.matting);
    write_alpha(o.out, a);
    RunRecord{"matte", {{"image", o.image}, {"trimap", o.trimap}}}.write(g, cfg, sidecar(o.out));
}

struct CompositeOpts {
    std::string fg, bg, alpha, out;
};

void cmd_composite(const Globals& g, const CompositeOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    write_rgb(o.out, composite(read_rgb(o.fg), read_rgb(o.bg), read_alpha(o.alpha)));
    RunRecord{"composite", {{"fg", o.fg}, {"bg", o.bg}, {"alpha", o.alpha}}}.write(g, cfg, sidecar(o.out));
}

// ---------------------------------------------------------------------------------------------
// datasetforge

struct SynthOpts {
    std::string fg, bg, out;
    int n = 0;
    std::int64_t seed = -1;
    bool rotate_bg = false;
    bool save_alpha = false;
};

/// Sample i uses foreground i mod |fg| and a background drawn from substream (seed, i),
/// optionally rotated by one of {0, 45, 90, 180} degrees.
void cmd_synth(const Globals& g, const SynthOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const std::uint64_t seed = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.seed;
    require(o.n >= 1, ErrorKind::InvalidArgument, "--n must be >= 1");
    const auto fgs = list_pngs(o.fg);
    const auto bgs = list_pngs(o.bg);
    const fs::path out(o.out);
    fs::create_directories(out / "images");
    fs::create_directories(out / "masks");
    fs::create_directories(out / "manifests");
    if (o.save_alpha) fs::create_directories(out / "alpha");

    std::vector<SampleRecord> records(o.n);
    std::vector<double> fg_fraction(o.n);
    parallel_for(static_cast<std::size_t>(o.n), g.jobs, [&](std::size_t i) {
        Rng draw = Rng::substream(seed, i);
        const fs::path& fgp = fgs[i % fgs.size()];
        const fs::path& bgp = bgs[static_cast<std::size_t>(draw.uniform_int(0, static_cast<std::int64_t>(bgs.size()) - 1))];
        const ImageRGB8 fg = read_rgb(fgp);
        ImageRGB8 bg = read_rgb(bgp);
        if (o.rotate_bg) {
            static constexpr int kAngles[4] = {0, 45, 90, 180};
            const int angle = kAngles[draw.uniform_int(0, 3)];
            if (angle != 0) bg = rotate(bg, angle);
        }
        SynthResult s;
        try {
            s = synthesize_sample(fg, bg, cfg.chroma, cfg.trimap, cfg.matting);
        } catch (const Error& e) {
            fail(e.kind(), "sample " + std::to_string(i) + " (foreground '" + fgp.string() + "'): " + e.what());
        }
        char name[32];
        std::snprintf(name, sizeof name, "sample_%05zu.png", i);
        write_rgb(out / "images" / name, s.image);
        LabelMask label(s.mask.width, s.mask.height);
        label.data = s.mask.data;
        write_label_mask(out / "masks" / name, label);
        if (o.save_alpha) write_alpha(out / "alpha" / name, s.alpha);
        SampleRecord rec;
        rec.image_path = std::string("../images/") + name;
        rec.mask_path = std::string("../masks/") + name;
        rec.source = SourceTag::Synthetic;
        rec.video_id = fgp.stem().string();
        rec.frame_index = static_cast<int>(i);
        records[i] = std::move(rec);
        fg_fraction[i] = static_cast<double>(count_ones(s.mask)) / static_cast<double>(s.mask.size());
    });
    DatasetManifest m;
    m.records = std::move(records);
    m.seed = seed;
    save_manifest(out / "manifests" / "manifest.json", m);
    double mean_fg = 0;
    for (double f : fg_fraction) mean_fg += f;
    RunRecord r{"synth", {{"fg", o.fg}, {"bg", o.bg}, {"n", o.n}, {"rotate_bg", o.rotate_bg}}};
    r.seeds = {{"synth", seed}};
    r.results = {{"samples", o.n}, {"mean_foreground_fraction", mean_fg / o.n}};
    r.write(g, cfg, out / "run_record.json");
    std::cout << "synthesized " << o.n << " samples into " << o.out << "\n";
}

struct RasterizeOpts {
    std::string annotation, out;
    int width = 0, height = 0;
};

void cmd_rasterize(const Globals& g, const RasterizeOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const AnnotationDocument doc = load_annotation(o.annotation);
    const int w = o.width > 0 ? o.width : doc.width, h = o.height > 0 ? o.height : doc.height;
    require(w >= 1 && h >= 1, ErrorKind::InvalidArgument,
            "annotation has no image size; pass --width and --height");
    const RasterizeResult res = rasterize(doc.polygons, w, h);
    for (const auto& warn : res.warnings) std::cerr << "warning: " << warn << "\n";
    write_label_mask(o.out, res.mask);
    RunRecord r{"rasterize", {{"annotation", o.annotation}, {"width", w}, {"height", h}}};
    r.results = {{"polygons", doc.polygons.size()}, {"warnings", res.warnings}};
    r.write(g, cfg, sidecar(o.out));
}

struct CollapseOpts {
    std::string in, out, map;
};

ClassMap parse_class_map(const std::string& s) {
    ClassMap m;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto colon = tok.find(':');
        require(colon != std::string::npos, ErrorKind::InvalidArgument, "--map entries look like src:dst, got '" + tok + "'");
        int src = -1, dst = -1;
        try {
            src = std::stoi(tok.substr(0, colon));
            dst = std::stoi(tok.substr(colon + 1));
        } catch (...) {
            fail(ErrorKind::InvalidArgument, "--map entry '" + tok + "' is not src:dst");
        }
        m.set(src, dst);
    }
    return m;
}

void cmd_collapse(const Globals& g, const CollapseOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const ClassMap map = o.map.empty() ? ClassMap::body_vs_background() : parse_class_map(o.map);
    write_label_mask(o.out, collapse(read_label_mask(o.in), map));
    RunRecord{"collapse", {{"in", o.in}, {"map", o.map.empty() ? "body_vs_background" : o.map}}}.write(g, cfg, sidecar(o.out));
}

struct StatsOpts {
    std::string manifest, out;
    int classes = 0;
};

void cmd_stats(const Globals& g, const StatsOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const int k = o.classes > 0 ? o.classes : cfg.net.num_classes;
    const ClassStats st = compute_class_stats(load_manifest(o.manifest), k);
    json j{{"pixel_count", st.pixel_count}, {"total_pixels", st.total_pixels}, {"frequencies", st.frequencies()}};
    std::cout << j.dump(2) << "\n";
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    RunRecord r{"stats", {{"manifest", o.manifest}, {"classes", k}}};
    r.results = j;
    r.write(g, cfg, o.out.empty() ? fs::path("egoseg-stats.run.json") : sidecar(o.out));
}

struct WeightsOpts {
    std::string manifest, frequencies, override_weights, out;
};

void cmd_weights(const Globals& g, const WeightsOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const int sources = !o.manifest.empty() + !o.frequencies.empty() + !o.override_weights.empty();
    require(sources == 1, ErrorKind::InvalidArgument, "weights needs exactly one of --manifest, --frequencies, --override");
    std::vector<double> w, freq;
    std::string source;
    if (!o.manifest.empty()) {
        const ClassStats st = compute_class_stats(load_manifest(o.manifest), cfg.net.num_classes);
        freq = st.frequencies();
        w = class_weights(st, cfg.net.num_classes);
        source = "manifest";
    } else if (!o.frequencies.empty()) {
        freq = parse_doubles(o.frequencies, "--frequencies");
        w = class_weights_from_frequencies(freq);
        source = "frequencies";
    } else {
        w = class_weights_override(parse_doubles(o.override_weights, "--override"), cfg.net.num_classes);
        source = "override";
    }
    std::string line = "weights:";
    for (double v : w) line += " " + fmt(v);
    std::cout << line << "\n";
    json j{{"source", source}, {"weights", w}};
    if (!freq.empty()) j["frequencies"] = freq;
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    RunRecord r{"weights", {{"manifest", o.manifest}, {"frequencies", o.frequencies}, {"override", o.override_weights}}};
    r.results = j;
    r.write(g, cfg, o.out.empty() ? fs::path("egoseg-weights.run.json") : sidecar(o.out));
}

struct MixOpts {
    std::vector<std::string> manifests, rules;
    std::string out;
    std::int64_t seed = -1;
};

/// Rules look like source=take_all, source=frames:5-10 or source=subset:2116.
std::pair<SourceTag, MixRule> parse_mix_rule(const std::string& s) {
    const auto eq = s.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidArgument, "--rule must look like source=rule, got '" + s + "'");
    const SourceTag tag = parse_source(s.substr(0, eq));
    const std::string r = s.substr(eq + 1);
    try {
        if (r == "take_all") return {tag, TakeAll{}};
        if (r.rfind("frames:", 0) == 0) {
            const std::string range = r.substr(7);
            const auto dash = range.find('-');
            FramesPerVideo f;
            f.min = std::stoi(range.substr(0, dash));
            f.max = dash == std::string::npos ? f.min : std::stoi(range.substr(dash + 1));
            return {tag, f};
        }
        if (r.rfind("subset:", 0) == 0) return {tag, FixedSubset{static_cast<std::size_t>(std::stoull(r.substr(7)))}};
    } catch (const std::logic_error&) {
    }
    fail(ErrorKind::InvalidArgument, "unknown mix rule '" + r + "' (use take_all, frames:MIN-MAX or subset:N)");
}

void cmd_mix(const Globals& g, const MixOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    MixSpec spec;
    spec.seed = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.seed;
    for (const auto& r : o.rules) {
        auto [tag, rule] = parse_mix_rule(r);
        spec.rules[tag] = rule;
    }
    std::vector<DatasetManifest> ms;
    for (const auto& p : o.manifests) ms.push_back(load_manifest(p));
    DatasetManifest out = build_mix(ms, spec);
    save_manifest(o.out, out);
    RunRecord r{"mix", {{"manifests", o.manifests}, {"rules", o.rules}}};
    r.seeds = {{"mix", spec.seed}};
    r.results = {{"records", out.records.size()}};
    r.write(g, cfg, sidecar(o.out));
    std::cout << "mixed " << out.records.size() << " records\n";
}

struct SplitOpts {
    std::string manifest, out;
    std::size_t train = 0, val = 0;
    std::int64_t seed = -1;
    bool group_by_video = false;
};

void cmd_split(const Globals& g, const SplitOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const std::uint64_t seed = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.seed;
    DatasetManifest m = load_manifest(o.manifest);
    DatasetManifest out = split(m, o.train, o.val, seed, o.group_by_video);
    // Keep record paths valid relative to the new manifest location.
    const fs::path out_dir = fs::absolute(fs::path(o.out)).parent_path();
    for (auto& rec : out.records) {
        rec.image_path = fs::relative(fs::absolute(m.resolve(rec.image_path)), out_dir).lexically_normal().generic_string();
        rec.mask_path = fs::relative(fs::absolute(m.resolve(rec.mask_path)), out_dir).lexically_normal().generic_string();
    }
    save_manifest(o.out, out);
    RunRecord r{"split", {{"manifest", o.manifest}, {"train", o.train}, {"val", o.val}, {"group_by_video", o.group_by_video}}};
    r.seeds = {{"split", seed}};
    r.write(g, cfg, sidecar(o.out));
    std::cout << "split: " << o.train << " train, " << o.val << " val\n";
}

// ---------------------------------------------------------------------------------------------
// tinynet / evalbench

std::vector<net::Sample> load_samples(const DatasetManifest& m, Split s, const net::NetConfig& nc) {
    std::vector<net::Sample> out;
    for (const SampleRecord* r : records_in(m, s)) {
        net::Sample smp{read_rgb(m.resolve(r->image_path)), read_label_mask(m.resolve(r->mask_path))};
        require(smp.image.width == smp.mask.width && smp.image.height == smp.mask.height, ErrorKind::InvalidInput,
                "record '" + r->image_path + "': image and mask sizes differ");
        out.push_back(net::fit_to_input(std::move(smp), nc.input_h, nc.input_w));
    }
    return out;
}

struct TrainOpts {
    std::string manifest, out, init;
    int steps = 0;
    std::int64_t seed = -1;
    bool no_augment = false;
};

void cmd_train(const Globals& g, const TrainOpts& o) {
    ToolkitConfig cfg = load_effective_config(g);
    if (o.steps > 0) cfg.train.max_steps = o.steps;
    if (o.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(o.seed);
    cfg.train.validate(cfg.net.num_classes);
    const DatasetManifest m = load_manifest(o.manifest);
    const auto samples = load_samples(m, Split::Train, cfg.net);
    require(!samples.empty(), ErrorKind::InvalidInput,
            "manifest '" + o.manifest + "' has no train records; run `egoseg split` first");
    const std::vector<double> weights = cfg.train.class_weights.empty()
                                            ? class_weights(compute_class_stats(m, cfg.net.num_classes), cfg.net.num_classes)
                                            : class_weights_override(cfg.train.class_weights, cfg.net.num_classes);
    net::Params<float> params = o.init.empty()
                                    ? net::init_params<float>(cfg.net, cfg.train.seed)
                                    : net::load_params<float>(o.init, cfg.net, net::LoadMode::EncoderOnly, cfg.train.seed);
    const fs::path out(o.out);
    fs::create_directories(out / "checkpoints");
    write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

    std::string csv = "step,loss\n";
    const bool augment = !o.no_augment && (cfg.augment.enable_chromatic || cfg.augment.enable_crop);
    net::TrainHooks hooks;
    hooks.on_step = [&](const net::StepReport& s) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d,%.9g\n", s.step, s.loss);
        csv += buf;
        if (s.step % 100 == 0 || s.step == cfg.train.max_steps)
            std::cerr << "step " << s.step << "/" << cfg.train.max_steps << " loss " << fmt(s.loss, 5) << "\n";
    };
    hooks.on_checkpoint = [&](int step) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%06d.bin", step);
        net::save_params(out / "checkpoints" / name, params);
    };
    const auto losses = net::train(cfg.net, params, samples, cfg.train, weights, augment ? &cfg.augment : nullptr, hooks);
    net::save_params(out / "final.bin", params);
    write_text(out / "loss.csv", csv);
    RunRecord r{"train", {{"manifest", o.manifest}, {"init", o.init}, {"augment", augment}}};
    r.seeds = {{"train", cfg.train.seed}, {"augment", cfg.augment.seed}};
    r.results = {{"steps", cfg.train.max_steps}, {"class_weights", weights}, {"final_loss", losses.back()},
                 {"train_samples", samples.size()}};
    r.write(g, cfg, out / "run_record.json");
}

/// Prediction at the network input size, resized (nearest) back to the image size.
LabelMask predict_any_size(const net::NetConfig& nc, net::Params<float>& p, const ImageRGB8& img) {
    const ImageRGB8 in = (img.width == nc.input_w && img.height == nc.input_h) ? img : resize_bilinear(img, nc.input_w, nc.input_h);
    LabelMask pred = net::predict(nc, p, in);
    return (pred.width == img.width && pred.height == img.height) ? pred : resize_nearest(pred, img.width, img.height);
}

struct EvalOpts {
    std::string pred, gt, weights, manifest, split = "val", out, pred_out, coverage = "full_body", name = "model";
    int classes = 0;
};

void cmd_eval(const Globals& g, const EvalOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const int k = o.classes > 0 ? o.classes : cfg.net.num_classes;
    ConfusionMatrix total(k);
    std::size_t images = 0;
    std::mutex mu;
    if (!o.pred.empty() || !o.gt.empty()) {
        require(!o.pred.empty() && !o.gt.empty() && o.weights.empty(), ErrorKind::InvalidArgument,
                "directory mode needs both --pred and --gt (and no --weights)");
        const auto gts = list_pngs(o.gt);
        parallel_for(gts.size(), g.jobs, [&](std::size_t i) {
            const fs::path pp = fs::path(o.pred) / gts[i].filename();
            require(fs::exists(pp), ErrorKind::Io, "no prediction '" + pp.string() + "' for ground truth '" + gts[i].string() + "'");
            ConfusionMatrix cm(k);
            cm.accumulate(read_label_mask(pp), read_label_mask(gts[i]));
            std::lock_guard lk(mu);
            total.merge(cm);
        });
        images = gts.size();
    } else {
        require(!o.weights.empty() && !o.manifest.empty(), ErrorKind::InvalidArgument,
                "eval needs --pred/--gt directories or --weights with --manifest");
        const DatasetManifest m = load_manifest(o.manifest);
        const Split s = parse_split(o.split);
        const auto recs = records_in(m, s);
        require(!recs.empty(), ErrorKind::InvalidInput, "manifest has no '" + o.split + "' records");
        net::Params<float> params = net::load_params<float>(o.weights, cfg.net);
        if (!o.pred_out.empty()) fs::create_directories(o.pred_out);
        // Inference shares the frozen parameters; predict() only reads them in eval mode.
        parallel_for(recs.size(), g.jobs, [&](std::size_t i) {
            const ImageRGB8 img = read_rgb(m.resolve(recs[i]->image_path));
            const LabelMask gt = read_label_mask(m.resolve(recs[i]->mask_path));
            const LabelMask pred = predict_any_size(cfg.net, params, img);
            if (!o.pred_out.empty()) write_label_mask(fs::path(o.pred_out) / fs::path(recs[i]->image_path).filename(), pred);
            ConfusionMatrix cm(k);
            cm.accumulate(pred, gt);
            std::lock_guard lk(mu);
            total.merge(cm);
        });
        images = recs.size();
    }
    const IoUReport rep = iou_report(total, parse_gt_coverage(o.coverage));
    json j = to_json(rep);
    j["images"] = images;
    j["confusion"] = to_json(total);
    const std::string row = o.manifest.empty() ? fs::path(o.gt).lexically_normal().filename().string() : o.split;
    std::cout << format_iou_table({o.name}, {{row.empty() ? o.gt : row, {rep.miou}}});
    std::cout << "miou " << fmt(rep.miou) << "  pixel_accuracy " << fmt(rep.pixel_accuracy) << "\n";
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    RunRecord r{"eval", {{"pred", o.pred}, {"gt", o.gt}, {"weights", o.weights}, {"manifest", o.manifest}, {"split", o.split}}};
    r.results = j;
    r.write(g, cfg, o.out.empty() ? fs::path("egoseg-eval.run.json") : sidecar(o.out));
}

struct BenchOpts {
    std::string weights, out, name = "ThunderNet-tiny";
    std::vector<std::string> resolutions;
    int warmup = -1, iters = -1;
    std::int64_t seed = -1;
};

void cmd_bench(const Globals& g, const BenchOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    std::vector<Resolution> res = cfg.bench.resolutions;
    if (!o.resolutions.empty()) {
        res.clear();
        for (const auto& s : o.resolutions) res.push_back(parse_resolution(s));
    }
    BenchmarkOptions bo;
    bo.warmup = o.warmup >= 0 ? o.warmup : cfg.bench.warmup;
    bo.iters = o.iters >= 0 ? o.iters : cfg.bench.iters;
    bo.environment = cfg.bench.environment.empty() ? "cpu, single-threaded, " + std::to_string(std::thread::hardware_concurrency()) + " hw threads"
                                                   : cfg.bench.environment;
    bo.model = o.name;
    const std::uint64_t seed = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.seed;
    net::Params<float> params = o.weights.empty() ? net::init_params<float>(cfg.net, seed) : net::load_params<float>(o.weights, cfg.net);
    net::Tensor4<float> input;
    BenchmarkModel model;
    model.prepare = [&](Resolution r) {
        cfg.net.check_input(r.h, r.w);
        input = net::Tensor4<float>(1, 3, r.h, r.w);
        Rng rng(seed);
        for (auto& v : input.data) v = static_cast<float>(rng.normal());
    };
    model.run = [&] {
        net::Tape<float> tape(false);
        auto x = tape.constant(input);
        auto out = net::model_forward(cfg.net, params, tape, x, net::Mode::Eval);
        require(out.logits->value.all_finite(), ErrorKind::InvalidInput, "non-finite logits");
    };
    const TimingReport rep = benchmark(model, res, bo);
    std::cout << format_timing_table({rep});
    const json j = to_json(rep);
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    RunRecord r{"bench", {{"weights", o.weights}, {"resolutions", j["entries"].size()}}};
    r.seeds = {{"input", seed}};
    r.write(g, cfg, o.out.empty() ? fs::path("egoseg-bench.run.json") : sidecar(o.out));
}

struct OverlayOpts {
    std::string image, mask, out, color = "255,0,0";
    double opacity = 0.5;
};

void cmd_overlay(const Globals& g, const OverlayOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const auto c = parse_doubles(o.color, "--color");
    require(c.size() == 3 && std::all_of(c.begin(), c.end(), [](double v) { return v >= 0 && v <= 255; }),
            ErrorKind::InvalidArgument, "--color must be r,g,b with values in 0..255");
    const OverlayColor col{static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]), static_cast<std::uint8_t>(c[2])};
    write_rgb(o.out, overlay(read_rgb(o.image), read_label_mask(o.mask), col, o.opacity));
    RunRecord{"overlay", {{"image", o.image}, {"mask", o.mask}, {"color", o.color}, {"opacity", o.opacity}}}.write(g, cfg, sidecar(o.out));
}

struct GenToyOpts {
    std::string out;
    int n_fg = 20, n_bg = 20, width = 64, height = 64;
    std::int64_t seed = -1;
};

/// Procedural stand-ins for captured footage: green-screen frames (fg/) and backgrounds (bg/).
void cmd_gen_toy(const Globals& g, const GenToyOpts& o) {
    const ToolkitConfig cfg = load_effective_config(g);
    const std::uint64_t seed = o.seed >= 0 ? static_cast<std::uint64_t>(o.seed) : cfg.seed;
    require(o.n_fg >= 1 && o.n_bg >= 1 && o.width >= 8 && o.height >= 8, ErrorKind::InvalidArgument,
            "gen-toy needs --n-fg, --n-bg >= 1 and sides >= 8");
    const fs::path out(o.out);
    fs::create_directories(out / "fg");
    fs::create_directories(out / "bg");
    parallel_for(static_cast<std::size_t>(o.n_fg + o.n_bg), g.jobs, [&](std::size_t i) {
        char name[32];
        if (i < static_cast<std::size_t>(o.n_fg)) {
            Rng rng = Rng::substream(seed, 2 * i);
            std::snprintf(name, sizeof name, "fg_%04zu.png", i);
            write_rgb(out / "fg" / name, toy::green_screen_frame(o.width, o.height, rng));
        } else {
            const std::size_t j = i - o.n_fg;
            Rng rng = Rng::substream(seed, 2 * j + 1);
            std::snprintf(name, sizeof name, "bg_%04zu.png", j);
            write_rgb(out / "bg" / name, toy::textured_background(o.width, o.height, rng));
        }
    });
    RunRecord r{"gen-toy", {{"n_fg", o.n_fg}, {"n_bg", o.n_bg}, {"width", o.width}, {"height", o.height}}};
    r.seeds = {{"gen_toy", seed}};
    r.write(g, cfg, out / "run_record.json");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"egoseg: egocentric body segmentation toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "toolkit config (JSON)");
    app.add_option("--jobs", g.jobs, "worker cap for synth/eval/gen-toy batch loops")->check(CLI::Range(1u, 256u));
    app.add_option("--record", g.record_path, "run-record path (default depends on the command)");
    app.set_version_flag("--version",
                         std::string("egoseg ") + kToolkitVersion + " (manifest format " + std::to_string(kManifestFormatVersion) +
                             ", weight format " + std::to_string(net::kWeightFormatVersion) + ")");

    std::function<void()> action;
    auto bind = [&](CLI::App* sub, auto fn, auto& opts) { sub->callback([&, fn] { action = [&, fn] { fn(g, opts); }; }); };

    ChromaOpts chroma;
    auto* s = app.add_subcommand("chroma-extract", "green-screen foreground mask (or --skin baseline)");
    s->add_option("--in", chroma.in)->required();
    s->add_option("--out", chroma.out)->required();
    s->add_flag("--skin", chroma.skin, "skin-colour baseline instead of the chroma key");
    bind(s, cmd_chroma_extract, chroma);

    TrimapOpts tri;
    s = app.add_subcommand("trimap", "trimap from a binary mask");
    s->add_option("--mask", tri.mask)->required();
    s->add_option("--out", tri.out)->required();
    s->add_option("--radius", tri.radius);
    s->add_option("--shape", tri.shape);
    bind(s, cmd_trimap, tri);

    MatteOpts matte;
    s = app.add_subcommand("matte", "shared-sampling alpha matte");
    s->add_option("--image", matte.image)->required();
    s->add_option("--trimap", matte.trimap)->required();
    s->add_option("--out", matte.out)->required();
    bind(s, cmd_matte, matte);

    CompositeOpts comp;
    s = app.add_subcommand("composite", "blend foreground over background with an alpha matte");
    s->add_option("--fg", comp.fg)->required();
    s->add_option("--bg", comp.bg)->required();
    s->add_option("--alpha", comp.alpha)->required();
    s->add_option("--out", comp.out)->required();
    bind(s, cmd_composite, comp);

    SynthOpts synth;
    s = app.add_subcommand("synth", "semi-synthetic corpus: key, trimap, matte, composite");
    s->add_option("--fg", synth.fg, "directory of green-screen frames")->required();
    s->add_option("--bg", synth.bg, "directory of backgrounds")->required();
    s->add_option("--out", synth.out)->required();
    s->add_option("--n", synth.n)->required();
    s->add_option("--seed", synth.seed);
    s->add_flag("--rotate-bg", synth.rotate_bg, "rotate each background by 0/45/90/180 degrees");
    s->add_flag("--save-alpha", synth.save_alpha);
    bind(s, cmd_synth, synth);

    RasterizeOpts rast;
    s = app.add_subcommand("rasterize", "polygon annotation JSON to label mask");
    s->add_option("--annotation", rast.annotation)->required();
    s->add_option("--out", rast.out)->required();
    s->add_option("--width", rast.width);
    s->add_option("--height", rast.height);
    bind(s, cmd_rasterize, rast);

    CollapseOpts col;
    s = app.add_subcommand("collapse", "map class ids (default: 1 stays body, everything else background)");
    s->add_option("--in", col.in)->required();
    s->add_option("--out", col.out)->required();
    s->add_option("--map", col.map, "src:dst,src:dst,...");
    bind(s, cmd_collapse, col);

    StatsOpts stats;
    s = app.add_subcommand("stats", "class pixel statistics over the train split");
    s->add_option("--manifest", stats.manifest)->required();
    s->add_option("--classes", stats.classes);
    s->add_option("--out", stats.out);
    bind(s, cmd_stats, stats);

    WeightsOpts wts;
    s = app.add_subcommand("weights", "class weights 1/(k p)");
    s->add_option("--manifest", wts.manifest);
    s->add_option("--frequencies", wts.frequencies, "comma-separated class frequencies");
    s->add_option("--override", wts.override_weights, "comma-separated weights taken verbatim");
    s->add_option("--out", wts.out);
    bind(s, cmd_weights, wts);

    MixOpts mix;
    s = app.add_subcommand("mix", "combine manifests with per-source rules");
    s->add_option("--manifest", mix.manifests)->required();
    s->add_option("--rule", mix.rules, "source=take_all | source=frames:MIN-MAX | source=subset:N")->required();
    s->add_option("--out", mix.out)->required();
    s->add_option("--seed", mix.seed);
    bind(s, cmd_mix, mix);

    SplitOpts spl;
    s = app.add_subcommand("split", "seeded train/val assignment");
    s->add_option("--manifest", spl.manifest)->required();
    s->add_option("--train", spl.train)->required();
    s->add_option("--val", spl.val)->required();
    s->add_option("--out", spl.out)->required();
    s->add_option("--seed", spl.seed);
    s->add_flag("--group-by-video", spl.group_by_video);
    bind(s, cmd_split, spl);

    TrainOpts tr;
    s = app.add_subcommand("train", "train the segmentation network");
    s->add_option("--manifest", tr.manifest)->required();
    s->add_option("--out", tr.out)->required();
    s->add_option("--steps", tr.steps);
    s->add_option("--seed", tr.seed);
    s->add_option("--init", tr.init, "encoder-only (or full) weight file to start from");
    s->add_flag("--no-augment", tr.no_augment);
    bind(s, cmd_train, tr);

    EvalOpts ev;
    s = app.add_subcommand("eval", "IoU report from mask directories or a trained model");
    s->add_option("--pred", ev.pred);
    s->add_option("--gt", ev.gt);
    s->add_option("--weights", ev.weights);
    s->add_option("--manifest", ev.manifest);
    s->add_option("--split", ev.split);
    s->add_option("--classes", ev.classes);
    s->add_option("--pred-out", ev.pred_out);
    s->add_option("--gt-coverage", ev.coverage, "full_body | skin_only");
    s->add_option("--name", ev.name, "model column label");
    s->add_option("--out", ev.out);
    bind(s, cmd_eval, ev);

    BenchOpts bench;
    s = app.add_subcommand("bench", "inference latency sweep");
    s->add_option("--weights", bench.weights);
    s->add_option("--resolution", bench.resolutions, "WxH, repeatable");
    s->add_option("--warmup", bench.warmup);
    s->add_option("--iters", bench.iters);
    s->add_option("--seed", bench.seed);
    s->add_option("--name", bench.name);
    s->add_option("--out", bench.out);
    bind(s, cmd_bench, bench);

    OverlayOpts ov;
    s = app.add_subcommand("overlay", "tint predicted foreground");
    s->add_option("--image", ov.image)->required();
    s->add_option("--mask", ov.mask)->required();
    s->add_option("--out", ov.out)->required();
    s->add_option("--color", ov.color, "r,g,b");
    s->add_option("--opacity", ov.opacity);
    bind(s, cmd_overlay, ov);

    GenToyOpts toyo;
    s = app.add_subcommand("gen-toy", "procedural green-screen frames and backgrounds");
    s->add_option("--out", toyo.out)->required();
    s->add_option("--n-fg", toyo.n_fg);
    s->add_option("--n-bg", toyo.n_bg);
    s->add_option("--width", toyo.width);
    s->add_option("--height", toyo.height);
    s->add_option("--seed", toyo.seed);
    bind(s, cmd_gen_toy, toyo);

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        action();
    } catch (const Error& e) {
        json line{{"error", to_string(e.kind())}, {"command", command}, {"message", e.what()}};
        std::cerr << "egoseg: error " << line.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json line{{"error", "internal"}, {"command", command}, {"message", e.what()}};
        std::cerr << "egoseg: error " << line.dump() << "\n";
        return 3;
    }
    return 0;
}
