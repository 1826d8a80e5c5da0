#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egoseg/image.hpp"

namespace egoseg {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct PolygonAnnotation {
    int class_id = 1;
    std::vector<Point2> vertices;
    int z_order = 0;
};

struct AnnotationDocument {
    std::string image;
    int width = 0;
    int height = 0;
    std::vector<PolygonAnnotation> polygons;
};

struct RasterizeResult {
    LabelMask mask;
    std::vector<std::string> warnings;
};

inline bool is_degenerate(const std::vector<Point2>& v) {
    if (v.size() < 3) return true;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double cross = (v[i].x - v[0].x) * (v[i + 1].y - v[0].y) - (v[i].y - v[0].y) * (v[i + 1].x - v[0].x);
        if (std::fabs(cross) > 1e-12) return false;
    }
    return true;
}

namespace detail {

// Even-odd fill sampled at pixel centres. Spans are [x_left, x_right) and edges use y0 <= yc < y1,
// so centres on a left/top edge are inside and centres on a right/bottom edge are not.
inline void fill_polygon(LabelMask& mask, const std::vector<Point2>& verts, std::uint8_t value) {
    std::vector<double> xs;
    const std::size_t n = verts.size();
    for (int y = 0; y < mask.height; ++y) {
        const double yc = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Point2& a = verts[i];
            const Point2& b = verts[(i + 1) % n];
            if (a.y == b.y) continue;
            const bool crosses = (a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y);
            if (!crosses) continue;
            xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // first centre with xc >= left, last with xc < right
            const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            const int x1 = std::min(mask.width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
            for (int x = x0; x <= x1; ++x) mask.at(x, y) = value;
        }
    }
}

} // namespace detail

/// Paints polygons in ascending z_order (stable for equal z); pixels outside every polygon stay 0.
inline RasterizeResult rasterize(const std::vector<PolygonAnnotation>& annotations, int w, int h) {
    RasterizeResult result{LabelMask(w, h, 0), {}};
    std::vector<std::size_t> order(annotations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return annotations[a].z_order < annotations[b].z_order; });
    for (std::size_t idx : order) {
        const auto& ann = annotations[idx];
        require(ann.class_id >= 0 && ann.class_id <= kMaxClassId, ErrorKind::InvalidInput,
                "polygon " + std::to_string(idx) + " has class id " + std::to_string(ann.class_id) +
                    " outside 0.." + std::to_string(kMaxClassId));
        std::vector<Point2> verts = ann.vertices;
        for (auto& p : verts) {
            p.x = std::clamp(p.x, 0.0, static_cast<double>(w));
            p.y = std::clamp(p.y, 0.0, static_cast<double>(h));
        }
        if (is_degenerate(verts)) {
            result.warnings.push_back("polygon " + std::to_string(idx) + " (class " + std::to_string(ann.class_id) +
                                      ") is degenerate; skipped");
            continue;
        }
        detail::fill_polygon(result.mask, verts, static_cast<std::uint8_t>(ann.class_id));
    }
    return result;
}

/// Class id relabelling table; -1 marks an id with no mapping.
struct ClassMap {
    std::array<int, 256> target;

    ClassMap() { target.fill(-1); }

    void set(int from, int to) {
        require(from >= 0 && from < 256 && to >= 0 && to <= kMaxClassId, ErrorKind::InvalidArgument,
                "class map entry " + std::to_string(from) + "->" + std::to_string(to) + " is out of range");
        target[from] = to;
    }

    /// Objects (2..31) fold into background; body stays 1.
    static ClassMap body_vs_background() {
        ClassMap m;
        m.set(0, 0);
        m.set(1, 1);
        for (int c = 2; c <= kMaxClassId; ++c) m.set(c, 0);
        return m;
    }
};

inline LabelMask collapse(const LabelMask& mask, const ClassMap& map = ClassMap::body_vs_background()) {
    LabelMask out(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const int t = map.target[mask.data[i]];
        if (t < 0)
            fail(ErrorKind::InvalidInput, "class id " + std::to_string(mask.data[i]) + " at pixel (" +
                                              std::to_string(i % mask.width) + "," + std::to_string(i / mask.width) +
                                              ") has no mapping");
        out.data[i] = static_cast<std::uint8_t>(t);
    }
    return out;
}

// Annotation JSON: {image, width, height, polygons: [{class_id, z_order, vertices: [[x,y], ...]}]}

inline AnnotationDocument parse_annotation(const nlohmann::json& j) {
    AnnotationDocument doc;
    try {
        doc.image = j.value("image", std::string{});
        doc.width = j.at("width").get<int>();
        doc.height = j.at("height").get<int>();
        for (const auto& p : j.at("polygons")) {
            PolygonAnnotation ann;
            ann.class_id = p.at("class_id").get<int>();
            ann.z_order = p.value("z_order", 0);
            for (const auto& v : p.at("vertices")) {
                require(v.is_array() && v.size() == 2, ErrorKind::Format, "vertex must be [x, y]");
                ann.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            doc.polygons.push_back(std::move(ann));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed annotation document: ") + e.what());
    }
    require(doc.width >= 1 && doc.height >= 1, ErrorKind::Format, "annotation width/height must be >= 1");
    return doc;
}

inline nlohmann::json to_json(const AnnotationDocument& doc) {
    nlohmann::json polys = nlohmann::json::array();
    for (const auto& p : doc.polygons) {
        nlohmann::json verts = nlohmann::json::array();
        for (const auto& v : p.vertices) verts.push_back({v.x, v.y});
        polys.push_back({{"class_id", p.class_id}, {"z_order", p.z_order}, {"vertices", verts}});
    }
    return {{"image", doc.image}, {"width", doc.width}, {"height", doc.height}, {"polygons", polys}};
}

inline AnnotationDocument load_annotation(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open annotation " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
    return parse_annotation(j);
}

} // namespace egoseg
