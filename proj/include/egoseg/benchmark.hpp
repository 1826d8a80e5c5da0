#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "egoseg/error.hpp"

namespace egoseg {

struct Resolution {
    int w = 0, h = 0;
    std::string str() const { return std::to_string(w) + "x" + std::to_string(h); }
    long long pixels() const { return static_cast<long long>(w) * h; }
};

/// Input sizes of the paper's latency table, as printed there (width x height).
inline std::vector<Resolution> table2_resolutions() { return {{320, 240}, {640, 480}, {960, 1280}, {1920, 2560}}; }

struct TimingEntry {
    Resolution requested;
    Resolution padded;
    bool ok = false;
    std::string failure;
    double mean_ms = 0, p50_ms = 0, p95_ms = 0, fps = 0;
    std::vector<double> samples_ms;
};

struct TimingReport {
    std::string model;
    std::string environment;
    int warmup_iters = 0;
    int measure_iters = 0;
    std::vector<TimingEntry> entries;
};

/// Rounds each side up to the next multiple of `multiple`.
inline Resolution pad_to_multiple(Resolution r, int multiple) {
    auto up = [multiple](int v) { return (v + multiple - 1) / multiple * multiple; };
    return {up(r.w), up(r.h)};
}

/// Linear-interpolated percentile (q in [0,100]) of an unsorted sample.
inline double percentile(std::vector<double> v, double q) {
    require(!v.empty(), ErrorKind::InvalidArgument, "percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

struct BenchmarkOptions {
    int warmup = 10;
    int iters = 50;
    int pad_multiple = 16;
    std::string environment;
    std::string model = "model";
};

/// A model under test. `prepare` builds whatever fixed input it needs for a (padded)
/// resolution and may throw to reject it; `run` performs one timed inference.
struct BenchmarkModel {
    std::function<void(Resolution)> prepare;
    std::function<void()> run;
};

/// Single-threaded latency sweep on a monotonic clock. Resolutions the model rejects are
/// recorded as failed entries and the sweep continues.
inline TimingReport benchmark(const BenchmarkModel& model, const std::vector<Resolution>& resolutions,
                              const BenchmarkOptions& opt) {
    require(opt.iters >= 10, ErrorKind::InvalidArgument, "benchmark needs at least 10 measured iterations");
    require(opt.warmup >= 0 && opt.pad_multiple >= 1, ErrorKind::InvalidArgument, "benchmark warmup must be >= 0");
    using clock = std::chrono::steady_clock;
    TimingReport rep{opt.model, opt.environment, opt.warmup, opt.iters, {}};
    for (const Resolution& r : resolutions) {
        TimingEntry e;
        e.requested = r;
        e.padded = pad_to_multiple(r, opt.pad_multiple);
        try {
            if (model.prepare) model.prepare(e.padded);
            for (int i = 0; i < opt.warmup; ++i) model.run();
            for (int i = 0; i < opt.iters; ++i) {
                const auto t0 = clock::now();
                model.run();
                const auto t1 = clock::now();
                e.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
            double sum = 0;
            for (double s : e.samples_ms) sum += s;
            e.mean_ms = sum / static_cast<double>(e.samples_ms.size());
            e.p50_ms = percentile(e.samples_ms, 50);
            e.p95_ms = percentile(e.samples_ms, 95);
            e.fps = e.mean_ms > 0 ? 1000.0 / e.mean_ms : 0.0;
            e.ok = true;
        } catch (const std::exception& ex) {
            e.ok = false;
            e.failure = ex.what();
            e.samples_ms.clear();
        }
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

inline nlohmann::json to_json(const TimingReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        nlohmann::json j{{"resolution", e.requested.str()}, {"padded", e.padded.str()}, {"ok", e.ok}};
        if (e.ok) {
            j["mean_ms"] = e.mean_ms;
            j["p50_ms"] = e.p50_ms;
            j["p95_ms"] = e.p95_ms;
            j["fps"] = e.fps;
        } else {
            j["failure"] = e.failure;
        }
        entries.push_back(j);
    }
    return {{"model", r.model}, {"environment", r.environment}, {"warmup_iters", r.warmup_iters},
            {"measure_iters", r.measure_iters}, {"entries", entries}};
}

/// Resolution columns across, one "Inference Time" row per report.
inline std::string format_timing_table(const std::vector<TimingReport>& reports) {
    require(!reports.empty(), ErrorKind::InvalidArgument, "timing table needs at least one report");
    auto cell = [](const std::string& s, int width) {
        std::string c = s;
        if (static_cast<int>(c.size()) < width) c.append(width - c.size(), ' ');
        return c + " ";
    };
    std::string out = cell("Resolution", 16) + cell("Network", 16);
    for (const auto& e : reports.front().entries) out += cell(e.requested.str(), 12);
    out += "\n";
    for (const auto& r : reports) {
        out += cell("Inference Time", 16) + cell(r.model, 16);
        for (const auto& e : r.entries) {
            char buf[32];
            if (e.ok) std::snprintf(buf, sizeof buf, "%.1f ms", e.mean_ms);
            else std::snprintf(buf, sizeof buf, "failed");
            out += cell(buf, 12);
        }
        out += "\n";
    }
    return out;
}

} // namespace egoseg
