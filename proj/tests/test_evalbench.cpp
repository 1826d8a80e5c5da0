#include <gtest/gtest.h>

#include <numeric>
#include <thread>

#include "egoseg/benchmark.hpp"
#include "egoseg/metrics.hpp"
#include "egoseg/rng.hpp"
#include "test_util.hpp"

using namespace egoseg;

namespace {

LabelMask random_labels(int w, int h, int k, std::uint64_t seed) {
    Rng rng(seed);
    LabelMask m(w, h);
    for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, k - 1));
    return m;
}

} // namespace

TEST(Confusion, TinyExamples) {
    ConfusionMatrix cm(2);
    cm.accumulate(LabelMask(2, 2, 1), LabelMask(2, 2, 1));
    EXPECT_EQ(cm.at(1, 1), 4u);
    EXPECT_EQ(cm.total(), 4u);

    ConfusionMatrix off(2);
    off.accumulate(LabelMask(2, 2, 1), LabelMask(2, 2, 0));
    EXPECT_EQ(off.at(0, 1), 4u);
    EXPECT_EQ(off.at(1, 0) + off.at(0, 0) + off.at(1, 1), 0u);
}

TEST(Confusion, MatchesBruteTallyAndOrderIndependent) {
    for (int k : {2, 3, 5}) {
        std::vector<std::pair<LabelMask, LabelMask>> pairs;
        for (int i = 0; i < 12; ++i) pairs.emplace_back(random_labels(32, 32, k, i * 2 + k), random_labels(32, 32, k, i * 2 + 1 + k * 100));
        ConfusionMatrix cm(k);
        std::vector<std::uint64_t> tally(k * k, 0);
        for (const auto& [p, g] : pairs) {
            cm.accumulate(p, g);
            for (std::size_t i = 0; i < p.size(); ++i) ++tally[g.data[i] * k + p.data[i]];
        }
        EXPECT_EQ(cm.counts(), tally);

        ConfusionMatrix rev(k), a(k), b(k);
        for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) rev.accumulate(it->first, it->second);
        for (std::size_t i = 0; i < pairs.size(); ++i) (i % 2 ? a : b).accumulate(pairs[i].first, pairs[i].second);
        a.merge(b);
        EXPECT_EQ(rev, cm);
        EXPECT_EQ(a, cm);
    }
}

TEST(Confusion, Errors) {
    ConfusionMatrix cm(2);
    EXPECT_THROW(cm.accumulate(LabelMask(2, 2), LabelMask(3, 2)), Error);
    LabelMask bad(2, 2);
    bad.data[3] = 2;
    try {
        cm.accumulate(bad, LabelMask(2, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("(1,1)"), std::string::npos);
    }
    EXPECT_THROW(cm.merge(ConfusionMatrix(3)), Error);
    EXPECT_THROW(iou_report(ConfusionMatrix(2)), Error);
}

TEST(IoU, PerfectAndDisjoint) {
    LabelMask m = random_labels(8, 8, 2, 4);
    IoUReport r = iou_report(accumulate(ConfusionMatrix(2), m, m));
    EXPECT_EQ(r.miou, 1.0);
    EXPECT_EQ(r.pixel_accuracy, 1.0);

    IoUReport d = iou_report(accumulate(ConfusionMatrix(2), LabelMask(2, 2, 1), LabelMask(2, 2, 0)));
    EXPECT_EQ(*d.per_class_iou[0], 0.0);
    EXPECT_EQ(*d.per_class_iou[1], 0.0);
    EXPECT_EQ(d.miou, 0.0);
}

TEST(IoU, ThreeSevenths) {
    LabelMask gt(4, 4), pred(4, 4);
    for (int i : {0, 1, 2, 3}) gt.data[i] = 1;
    for (int i : {1, 2, 3, 4, 5, 6}) pred.data[i] = 1;
    IoUReport r = iou_report(accumulate(ConfusionMatrix(2), pred, gt));
    EXPECT_DOUBLE_EQ(*r.per_class_iou[1], 3.0 / 7.0);
    EXPECT_DOUBLE_EQ(*r.per_class_iou[0], 9.0 / 13.0);
    EXPECT_NEAR(r.miou, 0.5604, 5e-5);
}

TEST(IoU, UndefinedClassExcluded) {
    IoUReport r = iou_report(accumulate(ConfusionMatrix(3), LabelMask(2, 2, 1), LabelMask(2, 2, 1)));
    EXPECT_FALSE(r.per_class_iou[0].has_value());
    EXPECT_FALSE(r.per_class_iou[2].has_value());
    EXPECT_EQ(r.miou, 1.0);
    auto j = to_json(r);
    EXPECT_TRUE(j["per_class_iou"][0].is_null());
}

TEST(IoU, PermutationConsistentAndBounded) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const int k = 3;
        LabelMask p = random_labels(16, 16, k, s), g = random_labels(16, 16, k, s + 50);
        ConfusionMatrix cm = accumulate(ConfusionMatrix(k), p, g);
        IoUReport r = iou_report(cm);
        const int perm[3] = {2, 0, 1};
        LabelMask pp = p, gg = g;
        for (auto& v : pp.data) v = static_cast<std::uint8_t>(perm[v]);
        for (auto& v : gg.data) v = static_cast<std::uint8_t>(perm[v]);
        IoUReport rp = iou_report(accumulate(ConfusionMatrix(k), pp, gg));
        for (int c = 0; c < k; ++c) EXPECT_DOUBLE_EQ(*rp.per_class_iou[perm[c]], *r.per_class_iou[c]);
        EXPECT_NEAR(rp.miou, r.miou, 1e-15);
        for (int c = 0; c < k; ++c) {
            const double tp = cm.tp(c);
            EXPECT_LE(*r.per_class_iou[c], tp / (tp + cm.fn(c)) + 1e-15);
            EXPECT_LE(*r.per_class_iou[c], tp / (tp + cm.fp(c)) + 1e-15);
        }
    }
}

TEST(IoU, CoverageFlagCarried) {
    IoUReport r = iou_report(accumulate(ConfusionMatrix(2), LabelMask(2, 2, 1), LabelMask(2, 2, 1)), GtCoverage::SkinOnly);
    EXPECT_EQ(to_json(r)["gt_coverage"], "skin_only");
    EXPECT_THROW(parse_gt_coverage("faces"), Error);
}

TEST(IoUTable, ShapeAndAverage) {
    const std::string t = format_iou_table({"Thundernet"}, {{"EgoHands", {0.5}}, {"GTEA", {0.7}}, {"Other", {std::nullopt}}});
    EXPECT_NE(t.find("Test Dataset"), std::string::npos);
    EXPECT_NE(t.find("Average"), std::string::npos);
    EXPECT_NE(t.find("0.60"), std::string::npos);
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 5);
}

TEST(Overlay, Examples) {
    ImageRGB8 img = testutil::random_image(6, 4, 1);
    LabelMask ones(6, 4, 1);
    EXPECT_EQ(overlay(img, ones, {}, 0.0), img);
    EXPECT_EQ(overlay(img, ones, {10, 20, 30}, 1.0), testutil::solid(6, 4, 10, 20, 30));

    ImageRGB8 black(4, 2);
    LabelMask half(4, 2);
    for (int y = 0; y < 2; ++y) half.at(0, y) = half.at(1, y) = 1;
    ImageRGB8 o = overlay(black, half, {255, 255, 255}, 0.5);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) EXPECT_EQ(o.px(x, y)[c], x < 2 ? 128 : 0);
    EXPECT_THROW(overlay(black, LabelMask(3, 2), {}, 0.5), Error);
}

TEST(Benchmark, PercentileInterpolates) {
    EXPECT_EQ(percentile({4, 1, 3, 2}, 50), 2.5);
    EXPECT_EQ(percentile({7}, 95), 7.0);
    EXPECT_NEAR(percentile({0, 10, 20, 30, 40}, 95), 38.0, 1e-12);
}

TEST(Benchmark, FiveMillisecondStub) {
    BenchmarkModel stub{nullptr, [] { std::this_thread::sleep_for(std::chrono::milliseconds(5)); }};
    BenchmarkOptions opt;
    opt.warmup = 2;
    opt.iters = 20;
    TimingReport r = benchmark(stub, {{320, 240}}, opt);
    ASSERT_TRUE(r.entries[0].ok);
    EXPECT_GE(r.entries[0].mean_ms, 5.0);
    EXPECT_LE(r.entries[0].mean_ms, 7.0);
    EXPECT_GE(r.entries[0].fps, 143.0);
    EXPECT_LE(r.entries[0].fps, 200.0);
    EXPECT_NEAR(r.entries[0].fps, 1000.0 / r.entries[0].mean_ms, 1e-9);
    EXPECT_EQ(r.entries[0].samples_ms.size(), 20u);
}

TEST(Benchmark, PaddingFailuresAndMinimumIters) {
    std::vector<Resolution> seen;
    BenchmarkModel m{[&](Resolution r) {
                         if (r.w > 1000) throw Error(ErrorKind::InvalidArgument, "too wide");
                         seen.push_back(r);
                     },
                     [] {}};
    BenchmarkOptions opt;
    opt.warmup = 0;
    opt.iters = 10;
    TimingReport r = benchmark(m, {{100, 50}, {2000, 16}, {16, 16}}, opt);
    ASSERT_EQ(r.entries.size(), 3u);
    EXPECT_EQ(r.entries[0].padded.str(), "112x64");
    EXPECT_FALSE(r.entries[1].ok);
    EXPECT_EQ(r.entries[1].failure, "too wide");
    EXPECT_TRUE(r.entries[2].ok);
    EXPECT_EQ(seen.size(), 2u);
    opt.iters = 9;
    EXPECT_THROW(benchmark(m, {{16, 16}}, opt), Error);
}

TEST(Benchmark, TableShape) {
    TimingReport r;
    r.model = "Thundernet";
    for (const auto& res : table2_resolutions()) {
        TimingEntry e;
        e.requested = res;
        e.ok = true;
        e.mean_ms = 7;
        r.entries.push_back(e);
    }
    const std::string t = format_timing_table({r});
    EXPECT_NE(t.find("320x240"), std::string::npos);
    EXPECT_NE(t.find("1920x2560"), std::string::npos);
    EXPECT_NE(t.find("Inference Time"), std::string::npos);
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 2);
    auto j = to_json(r);
    EXPECT_EQ(j["entries"].size(), 4u);
    EXPECT_TRUE(j["entries"][1].contains("fps"));
}
