#include <gtest/gtest.h>

#include <set>

#include "egoseg/augment.hpp"
#include "egoseg/dataset.hpp"
#include "egoseg/png_io.hpp"
#include "egoseg/synth.hpp"
#include "test_util.hpp"

using namespace egoseg;
using testutil::solid;

namespace {

SampleRecord rec(const std::string& name, const std::string& video, int frame, SourceTag src = SourceTag::Synthetic) {
    return {name + ".png", name + "_mask.png", src, video, frame, std::nullopt};
}

DatasetManifest numbered(int n, const std::string& video = "v", SourceTag src = SourceTag::Synthetic) {
    DatasetManifest m;
    for (int i = 0; i < n; ++i) m.records.push_back(rec(to_string(src) + std::string("_") + video + "_" + std::to_string(i), video, i, src));
    return m;
}

void write_mask_record(const testutil::TempDir& dir, DatasetManifest& m, const std::string& name, const LabelMask& mask) {
    write_label_mask(dir.path / (name + "_mask.png"), mask);
    SampleRecord r = rec(name, "v", static_cast<int>(m.records.size()));
    r.split = Split::Train;
    m.records.push_back(r);
}

} // namespace

TEST(Synth, NoGreenMeansAllForeground) {
    ImageRGB8 fg = testutil::random_image(24, 16, 3);
    for (std::size_t i = 0; i < fg.pixel_count(); ++i) fg.data[i * 3 + 1] = 0; // no green channel at all
    SynthResult r = synthesize_sample(fg, solid(24, 16, 0, 0, 255), default_green_range(), StructuringElement(2), {});
    EXPECT_EQ(count_ones(r.mask), r.mask.size());
    EXPECT_EQ(r.image, fg);
}

TEST(Synth, AllGreenIsAnError) {
    try {
        synthesize_sample(solid(16, 16, 0, 255, 0), solid(16, 16, 0, 0, 255), default_green_range(), StructuringElement(2), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
    }
}

TEST(Synth, RedSquareOnBlue) {
    const int w = 48, h = 40;
    ImageRGB8 fg = solid(w, h, 0, 255, 0);
    BinaryMask truth(w, h);
    for (int y = 10; y < 30; ++y)
        for (int x = 14; x < 34; ++x) {
            fg.px(x, y)[0] = 230;
            fg.px(x, y)[1] = 20;
            fg.px(x, y)[2] = 25;
            truth.at(x, y) = 1;
        }
    const ImageRGB8 bg = solid(w, h, 20, 30, 220);
    SynthResult r = synthesize_sample(fg, bg, default_green_range(), StructuringElement(3), {});
    EXPECT_EQ(r.mask, truth);
    double err = 0;
    int n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (r.trimap.data[i] != TrimapState::Unknown) continue;
        err += std::fabs(r.alpha.data[i] - truth.data[i]);
        ++n;
    }
    ASSERT_GT(n, 0);
    EXPECT_LE(err / n, 0.02);
    EXPECT_EQ(r.image.px(20, 20)[0], 230);
    EXPECT_EQ(r.image.px(2, 2)[2], 220);
    EXPECT_EQ(r.mask, alpha_to_label(r.alpha));
}

TEST(Synth, BackgroundResizedToForeground) {
    ImageRGB8 fg = solid(20, 20, 0, 255, 0);
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x) fg.px(x, y)[1] = 0;
    SynthResult r = synthesize_sample(fg, solid(7, 9, 10, 20, 30), default_green_range(), StructuringElement(1), {});
    EXPECT_EQ(r.image.width, 20);
    EXPECT_EQ(r.image.px(0, 0)[2], 30);
}

TEST(ClassStats, Examples) {
    testutil::TempDir dir("stats");
    DatasetManifest m;
    m.base_dir = dir.path;
    write_mask_record(dir, m, "a", LabelMask(2, 2, 1));
    write_mask_record(dir, m, "b", LabelMask(2, 2, 0));
    ClassStats s = compute_class_stats(m);
    EXPECT_EQ(s.pixel_count[0], 4u);
    EXPECT_EQ(s.pixel_count[1], 4u);
    EXPECT_EQ(s.frequencies(), (std::vector<double>{0.5, 0.5}));

    DatasetManifest one;
    one.base_dir = dir.path;
    LabelMask three(4, 4, 0);
    three.data[0] = three.data[5] = three.data[15] = 1;
    write_mask_record(dir, one, "c", three);
    ClassStats s1 = compute_class_stats(one);
    EXPECT_DOUBLE_EQ(s1.frequency(0), 0.8125);
    EXPECT_DOUBLE_EQ(s1.frequency(1), 0.1875);
    EXPECT_EQ(s1.pixel_count[0] + s1.pixel_count[1], s1.total_pixels);

    EXPECT_THROW(compute_class_stats(DatasetManifest{}), Error);
}

TEST(ClassStats, ValRecordsIgnoredAndMissingMaskNamed) {
    testutil::TempDir dir("stats2");
    DatasetManifest m;
    m.base_dir = dir.path;
    write_mask_record(dir, m, "a", LabelMask(2, 2, 1));
    SampleRecord v = rec("val_only", "v", 9);
    v.split = Split::Val; // its mask does not exist and must not be touched
    m.records.push_back(v);
    EXPECT_EQ(compute_class_stats(m).total_pixels, 4u);

    SampleRecord bad = rec("ghost", "v", 10);
    bad.split = Split::Train;
    m.records.push_back(bad);
    try {
        compute_class_stats(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("ghost.png"), std::string::npos);
    }
}

TEST(ClassWeights, Examples) {
    EXPECT_EQ(class_weights_from_frequencies({0.5, 0.5}), (std::vector<double>{1.0, 1.0}));
    auto w = class_weights_from_frequencies({0.8929, 0.1529});
    EXPECT_NEAR(w[0], 0.56, 0.005);
    EXPECT_NEAR(w[1], 3.27, 0.005);
    auto w2 = class_weights_from_frequencies({0.9, 0.1});
    EXPECT_NEAR(w2[0], 0.5556, 5e-5);
    EXPECT_DOUBLE_EQ(w2[1], 5.0);
    EXPECT_EQ(class_weights_override({0.56, 3.27}, 2), (std::vector<double>{0.56, 3.27}));
    EXPECT_THROW(class_weights_from_frequencies({1.0, 0.0}), Error);
    EXPECT_THROW(class_weights_override({0.56}, 2), Error);
}

TEST(ClassWeights, RarerClassWeighsMore) {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        const double p = rng.uniform(0.01, 0.99);
        auto w = class_weights_from_frequencies({p, 1 - p});
        if (p < 0.5) { EXPECT_GT(w[0], w[1]); }
        if (p > 0.5) { EXPECT_LT(w[0], w[1]); }
    }
}

TEST(Manifest, JsonRoundTripAndDuplicates) {
    testutil::TempDir dir("manifest");
    DatasetManifest m = numbered(5);
    m.seed = 42;
    m.records[2].split = Split::Val;
    save_manifest(dir.path / "m.json", m);
    DatasetManifest back = load_manifest(dir.path / "m.json");
    EXPECT_EQ(back.records, m.records);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.resolve("x.png"), dir.path / "x.png");

    m.records.push_back(m.records[0]);
    EXPECT_THROW(m.validate(), Error);
}

TEST(Mix, TakeAllIsIdentity) {
    DatasetManifest m = numbered(7);
    MixSpec spec{{{SourceTag::Synthetic, TakeAll{}}}, 3};
    EXPECT_EQ(build_mix({m}, spec).records, m.records);
}

TEST(Mix, EvenlySpacedFrames) {
    DatasetManifest m = numbered(20, "vid", SourceTag::ThuReadLike);
    MixSpec spec{{{SourceTag::ThuReadLike, FramesPerVideo{5, 5}}}, 1};
    DatasetManifest out = build_mix({m}, spec);
    std::vector<int> frames;
    for (const auto& r : out.records) frames.push_back(r.frame_index);
    EXPECT_EQ(frames, (std::vector<int>{0, 4, 9, 14, 19}));
}

TEST(Mix, FramesPerVideoCountInRange) {
    DatasetManifest m;
    for (int v = 0; v < 12; ++v) {
        DatasetManifest part = numbered(15, "video" + std::to_string(v), SourceTag::EgoOfficesLike);
        m.records.insert(m.records.end(), part.records.begin(), part.records.end());
    }
    DatasetManifest out = build_mix({m}, {{{SourceTag::EgoOfficesLike, FramesPerVideo{5, 10}}}, 8});
    std::map<std::string, int> per_video;
    for (const auto& r : out.records) ++per_video[r.video_id];
    EXPECT_EQ(per_video.size(), 12u);
    for (const auto& [v, c] : per_video) {
        EXPECT_GE(c, 5);
        EXPECT_LE(c, 10);
    }
}

TEST(Mix, SubsetDeterminismAndErrors) {
    DatasetManifest m = numbered(100, "v", SourceTag::EgoHumanLike);
    MixSpec a{{{SourceTag::EgoHumanLike, FixedSubset{50}}}, 1};
    MixSpec b{{{SourceTag::EgoHumanLike, FixedSubset{50}}}, 2};
    EXPECT_EQ(build_mix({m}, a).records, build_mix({m}, a).records);
    EXPECT_NE(build_mix({m}, a).records, build_mix({m}, b).records);
    EXPECT_EQ(build_mix({m}, a).records.size(), 50u);
    EXPECT_THROW(build_mix({m}, {{{SourceTag::EgoHumanLike, FixedSubset{101}}}, 1}), Error);
    EXPECT_THROW(build_mix({m}, {{{SourceTag::Synthetic, TakeAll{}}}, 1}), Error);
}

TEST(Split, SizesDeterminismAndErrors) {
    DatasetManifest m = numbered(10);
    DatasetManifest s = split(m, 8, 2, 5, false);
    EXPECT_EQ(records_in(s, Split::Train).size(), 8u);
    EXPECT_EQ(records_in(s, Split::Val).size(), 2u);
    EXPECT_EQ(split(m, 8, 2, 5, false).records, s.records);
    for (const auto& r : s.records) EXPECT_TRUE(r.split.has_value());
    EXPECT_THROW(split(m, 11, 0, 5, false), Error);
}

TEST(Split, GroupByVideoKeepsVideosWhole) {
    DatasetManifest m = numbered(5, "a");
    DatasetManifest b = numbered(5, "b");
    m.records.insert(m.records.end(), b.records.begin(), b.records.end());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        DatasetManifest s = split(m, 5, 5, seed, true);
        std::set<std::string> train, val;
        for (const auto* r : records_in(s, Split::Train)) train.insert(r->video_id);
        for (const auto* r : records_in(s, Split::Val)) val.insert(r->video_id);
        EXPECT_EQ(train.size(), 1u);
        EXPECT_EQ(val.size(), 1u);
        EXPECT_NE(*train.begin(), *val.begin());
    }
    EXPECT_THROW(split(m, 3, 5, 1, true), Error);
}

TEST(Augment, NeutralConfigIsIdentity) {
    AugmentConfig cfg;
    cfg.brightness_delta = 0;
    cfg.contrast_min = cfg.contrast_max = 1.0;
    cfg.saturation_min = cfg.saturation_max = 1.0;
    cfg.hue_delta_deg = 0;
    cfg.crop_fraction = 1.0;
    ImageRGB8 img = testutil::random_image(20, 14, 1);
    BinaryMask m = testutil::random_mask(20, 14, 2);
    Rng rng(3);
    auto out = augment(img, m, cfg, rng);
    EXPECT_EQ(out.image, img);
    EXPECT_EQ(out.mask, m);
}

TEST(Augment, BrightnessIsAdditive) {
    ChromaticJitter j;
    j.brightness = 10;
    ImageRGB8 out = apply_chromatic(solid(6, 6, 100, 100, 100), j);
    for (auto v : out.data) EXPECT_EQ(v, 110);
}

TEST(Augment, MaskStaysBinaryAndRegistered) {
    AugmentConfig cfg;
    cfg.crop_fraction = 0.5;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        // Image is the mask painted white-on-black; after augmentation with chromatic jitter off,
        // thresholding the image must reproduce the augmented mask.
        BinaryMask m(32, 24);
        Rng shape(seed);
        const int x0 = static_cast<int>(shape.uniform_int(0, 15)), y0 = static_cast<int>(shape.uniform_int(0, 11));
        for (int y = y0; y < y0 + 12; ++y)
            for (int x = x0; x < x0 + 16; ++x) m.at(x, y) = 1;
        ImageRGB8 img(32, 24);
        for (std::size_t i = 0; i < m.size(); ++i) std::fill_n(img.data.data() + i * 3, 3, m.data[i] ? 255 : 0);

        AugmentConfig geo = cfg;
        geo.enable_chromatic = false;
        Rng rng(seed);
        auto out = augment(img, m, geo, rng);
        ASSERT_EQ(out.mask.width, 32);
        ASSERT_EQ(out.mask.height, 24);
        int disagree = 0;
        for (std::size_t i = 0; i < out.mask.size(); ++i) {
            EXPECT_LE(out.mask.data[i], 1);
            disagree += (out.image.data[i * 3] >= 128) != (out.mask.data[i] == 1);
        }
        // Bilinear vs nearest may differ by at most a one-pixel rim around the rectangle.
        EXPECT_LE(disagree, 2 * (32 + 24));

        Rng rng2(seed);
        auto full = augment(img, m, cfg, rng2);
        for (auto v : full.mask.data) EXPECT_LE(v, 1);
    }
}

TEST(Augment, LabelMaskClassSetPreserved) {
    LabelMask m(16, 16, 0);
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) m.at(x, y) = 1;
    AugmentConfig cfg;
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng(s);
        auto out = augment(testutil::random_image(16, 16, s), m, cfg, rng);
        for (auto v : out.mask.data) EXPECT_TRUE(v == 0 || v == 1);
    }
}
