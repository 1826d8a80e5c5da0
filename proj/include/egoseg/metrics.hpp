#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "egoseg/image.hpp"

namespace egoseg {

/// k x k pixel tally, rows = ground truth, columns = prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int k) : k_(k), counts_(static_cast<std::size_t>(k) * k, 0) {
        require(k >= 2 && k <= kMaxClassId + 1, ErrorKind::InvalidArgument, "confusion matrix needs 2..32 classes");
    }

    int k() const { return k_; }
    std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }
    std::uint64_t tp(int c) const { return at(c, c); }
    std::uint64_t fp(int c) const {
        std::uint64_t s = 0;
        for (int g = 0; g < k_; ++g) s += at(g, c);
        return s - tp(c);
    }
    std::uint64_t fn(int c) const {
        std::uint64_t s = 0;
        for (int p = 0; p < k_; ++p) s += at(c, p);
        return s - tp(c);
    }

    void accumulate(const LabelMask& pred, const LabelMask& gt) {
        require(pred.width == gt.width && pred.height == gt.height, ErrorKind::InvalidArgument,
                "prediction " + dims_string(pred.width, pred.height) + " and ground truth " + dims_string(gt.width, gt.height) +
                    " differ in size");
        for (std::size_t i = 0; i < gt.data.size(); ++i) {
            const int g = gt.data[i], p = pred.data[i];
            if (g >= k_ || p >= k_) {
                const int x = static_cast<int>(i % gt.width), y = static_cast<int>(i / gt.width);
                fail(ErrorKind::InvalidInput, std::string(g >= k_ ? "ground truth" : "prediction") + " label " +
                                                  std::to_string(g >= k_ ? g : p) + " at (" + std::to_string(x) + "," +
                                                  std::to_string(y) + ") is not below k=" + std::to_string(k_));
            }
        }
        for (std::size_t i = 0; i < gt.data.size(); ++i) ++counts_[static_cast<std::size_t>(gt.data[i]) * k_ + pred.data[i]];
    }

    void merge(const ConfusionMatrix& other) {
        require(other.k_ == k_, ErrorKind::InvalidArgument, "cannot merge confusion matrices of different k");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int k_;
    std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMask& pred, const LabelMask& gt) {
    cm.accumulate(pred, gt);
    return cm;
}

enum class GtCoverage { FullBody, SkinOnly };

inline const char* to_string(GtCoverage g) { return g == GtCoverage::FullBody ? "full_body" : "skin_only"; }
inline GtCoverage parse_gt_coverage(const std::string& s) {
    if (s == "full_body") return GtCoverage::FullBody;
    if (s == "skin_only") return GtCoverage::SkinOnly;
    fail(ErrorKind::InvalidArgument, "gt_coverage must be full_body or skin_only, got '" + s + "'");
}

struct IoUReport {
    std::vector<std::optional<double>> per_class_iou; // nullopt: class absent from gt and prediction
    double miou = 0.0;
    double pixel_accuracy = 0.0;
    std::uint64_t total_pixels = 0;
    GtCoverage gt_coverage = GtCoverage::FullBody;
};

/// IoU_c = TP / (TP + FP + FN); classes with a zero denominator are left undefined and do not
/// enter the mean.
inline IoUReport iou_report(const ConfusionMatrix& cm, GtCoverage coverage = GtCoverage::FullBody) {
    IoUReport r;
    r.total_pixels = cm.total();
    require(r.total_pixels > 0, ErrorKind::InvalidInput, "iou_report on an empty confusion matrix");
    r.gt_coverage = coverage;
    double sum = 0.0;
    int defined = 0;
    std::uint64_t trace = 0;
    for (int c = 0; c < cm.k(); ++c) {
        trace += cm.tp(c);
        const std::uint64_t den = cm.tp(c) + cm.fp(c) + cm.fn(c);
        if (den == 0) {
            r.per_class_iou.push_back(std::nullopt);
            continue;
        }
        const double iou = static_cast<double>(cm.tp(c)) / static_cast<double>(den);
        r.per_class_iou.push_back(iou);
        sum += iou;
        ++defined;
    }
    r.miou = sum / defined;
    r.pixel_accuracy = static_cast<double>(trace) / static_cast<double>(r.total_pixels);
    return r;
}

inline nlohmann::json to_json(const IoUReport& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& v : r.per_class_iou) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    return {{"per_class_iou", per},
            {"miou", r.miou},
            {"pixel_accuracy", r.pixel_accuracy},
            {"total_pixels", r.total_pixels},
            {"gt_coverage", to_string(r.gt_coverage)}};
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (int g = 0; g < cm.k(); ++g) {
        nlohmann::json row = nlohmann::json::array();
        for (int p = 0; p < cm.k(); ++p) row.push_back(cm.at(g, p));
        rows.push_back(row);
    }
    return {{"k", cm.k()}, {"counts", rows}};
}

struct IouTableRow {
    std::string test_set;
    std::vector<std::optional<double>> values; // one per model column
};

/// Test sets down, models across, plus an Average row over the defined cells of each column.
inline std::string format_iou_table(const std::vector<std::string>& models, const std::vector<IouTableRow>& rows) {
    auto cell = [](const std::string& s) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-16s", s.c_str());
        return std::string(buf);
    };
    auto num = [&](std::optional<double> v) {
        if (!v) return cell("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v);
        return cell(buf);
    };
    std::string out = cell("Test Dataset");
    for (const auto& m : models) out += cell(m);
    out += "\n";
    std::vector<double> sums(models.size(), 0.0);
    std::vector<int> counts(models.size(), 0);
    for (const auto& r : rows) {
        require(r.values.size() == models.size(), ErrorKind::InvalidArgument, "iou table row has the wrong column count");
        out += cell(r.test_set);
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            out += num(r.values[i]);
            if (r.values[i]) sums[i] += *r.values[i], ++counts[i];
        }
        out += "\n";
    }
    out += cell("Average");
    for (std::size_t i = 0; i < models.size(); ++i)
        out += num(counts[i] ? std::optional<double>(sums[i] / counts[i]) : std::nullopt);
    out += "\n";
    return out;
}

struct OverlayColor {
    std::uint8_t r = 255, g = 0, b = 0;
};

/// Pixels with a nonzero label are blended toward `color` with constant alpha `opacity`,
/// using the compositing arithmetic.
inline ImageRGB8 overlay(const ImageRGB8& img, const LabelMask& pred, OverlayColor color, double opacity) {
    require(img.width == pred.width && img.height == pred.height, ErrorKind::InvalidArgument,
            "overlay: image " + dims_string(img.width, img.height) + " and mask " + dims_string(pred.width, pred.height) +
                " differ");
    require(opacity >= 0.0 && opacity <= 1.0, ErrorKind::InvalidArgument, "overlay opacity must lie in [0,1]");
    ImageRGB8 out = img;
    const double c[3] = {color.r / 255.0, color.g / 255.0, color.b / 255.0};
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (!pred.data[i]) continue;
        for (int k = 0; k < 3; ++k) out.data[i * 3 + k] = to_byte(opacity * c[k] + (1.0 - opacity) * img.data[i * 3 + k] / 255.0);
    }
    return out;
}

} // namespace egoseg
