#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "egoseg/image.hpp"
#include "egoseg/png_io.hpp"
#include "egoseg/rng.hpp"

namespace egoseg {

enum class SourceTag { EgoHumanLike, ThuReadLike, EgoOfficesLike, Synthetic };
enum class Split { Train, Val };

inline const char* to_string(SourceTag s) {
    switch (s) {
    case SourceTag::EgoHumanLike: return "ego_human_like";
    case SourceTag::ThuReadLike: return "thu_read_like";
    case SourceTag::EgoOfficesLike: return "ego_offices_like";
    case SourceTag::Synthetic: return "synthetic";
    }
    return "?";
}

inline SourceTag parse_source(const std::string& s) {
    for (auto t : {SourceTag::EgoHumanLike, SourceTag::ThuReadLike, SourceTag::EgoOfficesLike, SourceTag::Synthetic})
        if (s == to_string(t)) return t;
    fail(ErrorKind::Format, "unknown source tag '" + s + "'");
}

inline const char* to_string(Split s) { return s == Split::Train ? "train" : "val"; }

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    fail(ErrorKind::Format, "unknown split '" + s + "'");
}

struct SampleRecord {
    std::string image_path;
    std::string mask_path;
    SourceTag source = SourceTag::Synthetic;
    std::string video_id;
    int frame_index = 0;
    std::optional<Split> split; // unset until split() assigns it

    bool operator==(const SampleRecord&) const = default;
};

/// Record paths are stored as written and resolved against `base_dir` (the manifest's directory).
struct DatasetManifest {
    std::vector<SampleRecord> records;
    std::uint64_t seed = 0;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& p) const {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }

    void validate() const {
        std::set<std::string> seen;
        for (const auto& r : records)
            require(seen.insert(r.image_path).second, ErrorKind::InvalidInput,
                    "manifest lists image '" + r.image_path + "' more than once");
    }
};

inline constexpr int kManifestFormatVersion = 1;

inline nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : m.records) {
        recs.push_back({{"image_path", r.image_path},
                        {"mask_path", r.mask_path},
                        {"source", to_string(r.source)},
                        {"video_id", r.video_id},
                        {"frame_index", r.frame_index},
                        {"split", r.split ? nlohmann::json(to_string(*r.split)) : nlohmann::json(nullptr)}});
    }
    return {{"format_version", kManifestFormatVersion}, {"seed", m.seed}, {"records", recs}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
    DatasetManifest m;
    m.base_dir = std::move(base_dir);
    try {
        const int version = j.at("format_version").get<int>();
        require(version == kManifestFormatVersion, ErrorKind::Format,
                "unsupported manifest format_version " + std::to_string(version));
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& r : j.at("records")) {
            SampleRecord rec;
            rec.image_path = r.at("image_path").get<std::string>();
            rec.mask_path = r.at("mask_path").get<std::string>();
            rec.source = parse_source(r.at("source").get<std::string>());
            rec.video_id = r.value("video_id", std::string{});
            rec.frame_index = r.value("frame_index", 0);
            if (r.contains("split") && !r["split"].is_null()) rec.split = parse_split(r["split"].get<std::string>());
            m.records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write manifest " + path.string());
    out << to_json(m).dump(2) << "\n";
}

// ---------------------------------------------------------------------------------------------
// Mixing

struct TakeAll {};
struct FramesPerVideo {
    int min = 5;
    int max = 10;
};
struct FixedSubset {
    std::size_t count = 0;
};
using MixRule = std::variant<TakeAll, FramesPerVideo, FixedSubset>;

struct MixSpec {
    std::map<SourceTag, MixRule> rules;
    std::uint64_t seed = 0;
};

/// Evenly spaced picks of m out of n ordered frames, endpoints included: floor(i*(n-1)/(m-1)).
inline std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t m) {
    std::vector<std::size_t> out;
    if (n == 0 || m == 0) return out;
    m = std::min(m, n);
    if (m == 1) return {(n - 1) / 2};
    for (std::size_t i = 0; i < m; ++i) out.push_back(i * (n - 1) / (m - 1));
    return out;
}

namespace detail {

inline std::vector<SampleRecord> mix_frames_per_video(const std::vector<SampleRecord>& recs, FramesPerVideo rule,
                                                      std::uint64_t seed, SourceTag src) {
    require(rule.min >= 0 && rule.min <= rule.max, ErrorKind::InvalidArgument,
            "frames_per_video needs 0 <= min <= max");
    std::map<std::string, std::vector<std::size_t>> videos;
    for (std::size_t i = 0; i < recs.size(); ++i) videos[recs[i].video_id].push_back(i);
    std::vector<std::size_t> keep;
    for (auto& [vid, idx] : videos) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return recs[a].frame_index < recs[b].frame_index; });
        Rng rng = Rng::substream(seed, fnv1a(std::string(to_string(src)) + "/" + vid));
        const auto m = static_cast<std::size_t>(rng.uniform_int(rule.min, rule.max));
        for (std::size_t pick : evenly_spaced(idx.size(), m)) keep.push_back(idx[pick]);
    }
    std::sort(keep.begin(), keep.end());
    std::vector<SampleRecord> out;
    for (auto i : keep) out.push_back(recs[i]);
    return out;
}

inline std::vector<SampleRecord> mix_fixed_subset(const std::vector<SampleRecord>& recs, FixedSubset rule,
                                                  std::uint64_t seed, SourceTag src) {
    require(rule.count <= recs.size(), ErrorKind::InvalidArgument,
            std::string("fixed_subset_size ") + std::to_string(rule.count) + " exceeds the " +
                std::to_string(recs.size()) + " records of source " + to_string(src));
    std::vector<std::size_t> idx(recs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = Rng::substream(seed, fnv1a(to_string(src)));
    for (std::size_t i = 0; i < rule.count; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size() - 1)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(rule.count);
    std::sort(idx.begin(), idx.end());
    std::vector<SampleRecord> out;
    for (auto i : idx) out.push_back(recs[i]);
    return out;
}

} // namespace detail

/// Combines source manifests under per-source rules. Deterministic in (inputs, spec.seed).
inline DatasetManifest build_mix(const std::vector<DatasetManifest>& manifests, const MixSpec& spec) {
    std::vector<SourceTag> order;
    std::map<SourceTag, std::vector<SampleRecord>> by_source;
    for (const auto& m : manifests) {
        for (const auto& r : m.records) {
            if (!by_source.count(r.source)) order.push_back(r.source);
            SampleRecord rec = r;
            // paths are rebased so the mixed manifest stands on its own
            if (!m.base_dir.empty()) {
                rec.image_path = std::filesystem::absolute(m.resolve(r.image_path)).lexically_normal().string();
                rec.mask_path = std::filesystem::absolute(m.resolve(r.mask_path)).lexically_normal().string();
            }
            by_source[r.source].push_back(std::move(rec));
        }
    }
    DatasetManifest out;
    out.seed = spec.seed;
    for (SourceTag src : order) {
        const auto it = spec.rules.find(src);
        require(it != spec.rules.end(), ErrorKind::InvalidArgument,
                std::string("mix spec has no rule for source ") + to_string(src));
        const auto& recs = by_source[src];
        std::vector<SampleRecord> picked;
        if (std::holds_alternative<TakeAll>(it->second))
            picked = recs;
        else if (const auto* fpv = std::get_if<FramesPerVideo>(&it->second))
            picked = detail::mix_frames_per_video(recs, *fpv, spec.seed, src);
        else
            picked = detail::mix_fixed_subset(recs, std::get<FixedSubset>(it->second), spec.seed, src);
        out.records.insert(out.records.end(), picked.begin(), picked.end());
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------------------------
// Splitting

namespace detail {

// Picks a subset of `sizes` summing to exactly `target`, preferring earlier entries.
inline std::optional<std::vector<bool>> exact_subset(const std::vector<std::size_t>& sizes, std::size_t target) {
    const std::size_t n = sizes.size();
    std::vector<std::vector<bool>> reach(n + 1, std::vector<bool>(target + 1, false));
    reach[n][0] = true;
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t s = 0; s <= target; ++s)
            reach[i][s] = reach[i + 1][s] || (s >= sizes[i] && reach[i + 1][s - sizes[i]]);
    }
    if (!reach[0][target]) return std::nullopt;
    std::vector<bool> take(n, false);
    std::size_t s = target;
    for (std::size_t i = 0; i < n; ++i) {
        if (s >= sizes[i] && reach[i + 1][s - sizes[i]]) {
            take[i] = true;
            s -= sizes[i];
        }
    }
    return take;
}

} // namespace detail

/// Seeded shuffle, then the first train_count records go to train and the next val_count to val;
/// records beyond train_count + val_count are dropped. With group_by_video whole videos move together.
inline DatasetManifest split(const DatasetManifest& manifest, std::size_t train_count, std::size_t val_count,
                             std::uint64_t seed, bool group_by_video) {
    const std::size_t n = manifest.records.size();
    require(train_count + val_count <= n, ErrorKind::InvalidArgument,
            "split of " + std::to_string(train_count) + "+" + std::to_string(val_count) + " exceeds the " +
                std::to_string(n) + " available records");
    Rng rng(seed);
    std::vector<std::optional<Split>> assign(n);
    if (!group_by_video) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        for (std::size_t k = 0; k < train_count + val_count; ++k) assign[perm[k]] = k < train_count ? Split::Train : Split::Val;
    } else {
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = manifest.records[i];
            groups[std::string(to_string(r.source)) + "/" + r.video_id].push_back(i);
        }
        std::vector<const std::vector<std::size_t>*> vids;
        for (const auto& [key, idx] : groups) vids.push_back(&idx);
        for (std::size_t i = vids.size(); i > 1; --i) std::swap(vids[i - 1], vids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        std::vector<std::size_t> sizes;
        for (auto* v : vids) sizes.push_back(v->size());
        const auto train_pick = detail::exact_subset(sizes, train_count);
        require(train_pick.has_value(), ErrorKind::InvalidArgument,
                "no whole-video grouping yields exactly " + std::to_string(train_count) + " training records");
        std::vector<std::size_t> rest_sizes, rest_index;
        for (std::size_t v = 0; v < vids.size(); ++v) {
            if ((*train_pick)[v]) {
                for (auto i : *vids[v]) assign[i] = Split::Train;
            } else {
                rest_sizes.push_back(sizes[v]);
                rest_index.push_back(v);
            }
        }
        const auto val_pick = detail::exact_subset(rest_sizes, val_count);
        require(val_pick.has_value(), ErrorKind::InvalidArgument,
                "no whole-video grouping yields exactly " + std::to_string(val_count) + " validation records");
        for (std::size_t k = 0; k < rest_index.size(); ++k)
            if ((*val_pick)[k])
                for (auto i : *vids[rest_index[k]]) assign[i] = Split::Val;
    }
    DatasetManifest out;
    out.seed = seed;
    out.base_dir = manifest.base_dir;
    for (std::size_t i = 0; i < n; ++i) {
        if (!assign[i]) continue;
        SampleRecord r = manifest.records[i];
        r.split = assign[i];
        out.records.push_back(std::move(r));
    }
    return out;
}

inline std::vector<const SampleRecord*> records_in(const DatasetManifest& m, Split s) {
    std::vector<const SampleRecord*> out;
    for (const auto& r : m.records)
        if (r.split == s) out.push_back(&r);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Class statistics and loss weights

struct ClassStats {
    std::vector<std::uint64_t> pixel_count;
    std::uint64_t total_pixels = 0;

    double frequency(int c) const { return total_pixels ? static_cast<double>(pixel_count.at(c)) / total_pixels : 0.0; }
    std::vector<double> frequencies() const {
        std::vector<double> f(pixel_count.size());
        for (std::size_t c = 0; c < f.size(); ++c) f[c] = frequency(static_cast<int>(c));
        return f;
    }
};

inline void add_mask(ClassStats& stats, const LabelMask& mask, const std::string& what) {
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto v = mask.data[i];
        require(v < stats.pixel_count.size(), ErrorKind::InvalidInput,
                what + ": class id " + std::to_string(v) + " >= " + std::to_string(stats.pixel_count.size()) +
                    " (collapse the mask first)");
        ++stats.pixel_count[v];
    }
    stats.total_pixels += mask.size();
}

/// Exact per-class pixel counts over the train split.
inline ClassStats compute_class_stats(const DatasetManifest& manifest, int num_classes = 2) {
    ClassStats stats;
    stats.pixel_count.assign(num_classes, 0);
    const auto train = records_in(manifest, Split::Train);
    require(!train.empty(), ErrorKind::InvalidInput, "manifest has no training records");
    for (const auto* r : train) {
        LabelMask mask;
        try {
            mask = read_label_mask(manifest.resolve(r->mask_path));
        } catch (const Error& e) {
            fail(e.kind(), "record '" + r->image_path + "': cannot read mask: " + e.what());
        }
        add_mask(stats, mask, "record '" + r->image_path + "'");
    }
    return stats;
}

/// w_c = 1 / (k * p_c).
inline std::vector<double> class_weights_from_frequencies(const std::vector<double>& freq) {
    const double k = static_cast<double>(freq.size());
    std::vector<double> w(freq.size());
    for (std::size_t c = 0; c < freq.size(); ++c) {
        require(freq[c] > 0.0, ErrorKind::InvalidInput,
                "class " + std::to_string(c) +
                    " never occurs in the training split; supply explicit weights through the override path");
        w[c] = 1.0 / (k * freq[c]);
    }
    return w;
}

inline std::vector<double> class_weights(const ClassStats& stats, int k) {
    require(static_cast<int>(stats.pixel_count.size()) == k, ErrorKind::InvalidArgument,
            "class stats carry " + std::to_string(stats.pixel_count.size()) + " classes, expected " + std::to_string(k));
    require(stats.total_pixels > 0, ErrorKind::InvalidInput, "class stats are empty");
    return class_weights_from_frequencies(stats.frequencies());
}

/// Explicit weights are taken verbatim.
inline std::vector<double> class_weights_override(const std::vector<double>& weights, int k) {
    require(static_cast<int>(weights.size()) == k, ErrorKind::InvalidArgument,
            "override supplies " + std::to_string(weights.size()) + " weights for " + std::to_string(k) + " classes");
    for (double w : weights) require(w > 0.0, ErrorKind::InvalidArgument, "class weights must be positive");
    return weights;
}

} // namespace egoseg
