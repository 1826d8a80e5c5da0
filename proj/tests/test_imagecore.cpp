#include <gtest/gtest.h>

#include <cmath>

#include "egoseg/color.hpp"
#include "egoseg/geometry.hpp"
#include "egoseg/morphology.hpp"
#include "egoseg/png_io.hpp"
#include "test_util.hpp"

using namespace egoseg;

namespace {

// Naive window filter; out-of-bounds reads as 0.
BinaryMask brute_filter(const BinaryMask& m, const StructuringElement& se, bool take_max) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            int acc = take_max ? 0 : 1;
            for (int dy = -se.radius; dy <= se.radius; ++dy)
                for (int dx = -se.radius; dx <= se.radius; ++dx) {
                    if (!se.contains(dx, dy)) continue;
                    const int v = m.in_bounds(x + dx, y + dy) ? m.at(x + dx, y + dy) : 0;
                    acc = take_max ? std::max(acc, v) : std::min(acc, v);
                }
            out.at(x, y) = static_cast<std::uint8_t>(acc);
        }
    return out;
}

} // namespace

TEST(Hsv, PrimaryAndGray) {
    Hsv g = rgb_to_hsv(std::uint8_t{0}, std::uint8_t{255}, std::uint8_t{0});
    EXPECT_FLOAT_EQ(g.h, 120.0f);
    EXPECT_FLOAT_EQ(g.s, 1.0f);
    EXPECT_FLOAT_EQ(g.v, 1.0f);

    Hsv k = rgb_to_hsv(std::uint8_t{0}, std::uint8_t{0}, std::uint8_t{0});
    EXPECT_EQ(k.h, 0.0f);
    EXPECT_EQ(k.s, 0.0f);
    EXPECT_EQ(k.v, 0.0f);

    Hsv m = rgb_to_hsv(std::uint8_t{128}, std::uint8_t{128}, std::uint8_t{128});
    EXPECT_EQ(m.s, 0.0f);
    EXPECT_NEAR(m.v, 128.0 / 255.0, 1e-6);
}

TEST(Hsv, ImageLayoutMatchesPixelwise) {
    ImageRGB8 img = testutil::random_image(7, 5, 3);
    ImageF32 hsv = rgb_to_hsv(img);
    ASSERT_EQ(hsv.width, 7);
    ASSERT_EQ(hsv.height, 5);
    ASSERT_EQ(hsv.channels, 3);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) {
            const auto* p = img.px(x, y);
            Hsv e = rgb_to_hsv(p[0], p[1], p[2]);
            EXPECT_EQ(hsv.at(0, x, y), e.h);
            EXPECT_EQ(hsv.at(1, x, y), e.s);
            EXPECT_EQ(hsv.at(2, x, y), e.v);
            EXPECT_GE(e.h, 0.0f);
            EXPECT_LT(e.h, 360.0f);
        }
}

TEST(Hsv, RoundTripWithinOneLevel) {
    // Exhaustive over a 6-bit lattice plus the extremes.
    for (int r = 0; r < 256; r += 5)
        for (int g = 0; g < 256; g += 5)
            for (int b = 0; b < 256; b += 5) {
                Rgbf back = hsv_to_rgb(rgb_to_hsv(std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)));
                EXPECT_LE(std::abs(int(to_byte(back.r)) - r), 1);
                EXPECT_LE(std::abs(int(to_byte(back.g)) - g), 1);
                EXPECT_LE(std::abs(int(to_byte(back.b)) - b), 1);
            }
}

TEST(Morphology, DilateEmptyAndSingle) {
    BinaryMask z(12, 12);
    EXPECT_EQ(dilate(z, StructuringElement(3)), z);
    EXPECT_EQ(dilate(z, StructuringElement(2, SeShape::Disc)), z);

    BinaryMask one(12, 12);
    one.at(5, 5) = 1;
    BinaryMask d = dilate(one, StructuringElement(1));
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) EXPECT_EQ(d.at(x, y), (std::abs(x - 5) <= 1 && std::abs(y - 5) <= 1) ? 1 : 0);
}

TEST(Morphology, ErodeBorderAndSingle) {
    BinaryMask ones(9, 7, 1);
    BinaryMask e = erode(ones, StructuringElement(1));
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) EXPECT_EQ(e.at(x, y), (x > 0 && y > 0 && x < 8 && y < 6) ? 1 : 0);

    BinaryMask one(9, 7);
    one.at(4, 3) = 1;
    EXPECT_EQ(count_ones(erode(one, StructuringElement(1))), 0u);
}

class MorphologyOracle : public ::testing::TestWithParam<int> {};

TEST_P(MorphologyOracle, MatchesBruteForce) {
    const int seed = GetParam();
    for (int r = 1; r <= 3; ++r)
        for (SeShape shape : {SeShape::Square, SeShape::Disc}) {
            BinaryMask m = testutil::random_mask(10 + seed, 10, seed * 31 + r);
            StructuringElement se(r, shape);
            EXPECT_EQ(dilate(m, se), brute_filter(m, se, true)) << "r=" << r;
            EXPECT_EQ(erode(m, se), brute_filter(m, se, false)) << "r=" << r;
        }
}

INSTANTIATE_TEST_SUITE_P(Seeds, MorphologyOracle, ::testing::Range(0, 8));

TEST(Morphology, MonotoneAndDual) {
    for (int seed = 0; seed < 20; ++seed) {
        BinaryMask m = testutil::random_mask(17, 13, seed, 0.6);
        StructuringElement se(1 + seed % 3, seed % 2 ? SeShape::Disc : SeShape::Square);
        BinaryMask e = erode(m, se), d = dilate(m, se);
        for (std::size_t i = 0; i < m.size(); ++i) {
            EXPECT_LE(e.data[i], m.data[i]);
            EXPECT_LE(m.data[i], d.data[i]);
        }
        // Duality holds exactly once the mask is framed by a zero border wider than the element.
        const int pad = se.radius + 1;
        BinaryMask p(m.width + 2 * pad, m.height + 2 * pad);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) p.at(x + pad, y + pad) = m.at(x, y);
        BinaryMask lhs = erode(p, se);
        BinaryMask rhs = complement(dilate(complement(p), se));
        for (int y = se.radius; y < p.height - se.radius; ++y)
            for (int x = se.radius; x < p.width - se.radius; ++x) EXPECT_EQ(lhs.at(x, y), rhs.at(x, y));
    }
}

TEST(Rotate, GroupLaws) {
    ImageRGB8 img = testutil::random_image(5, 3, 9);
    EXPECT_EQ(rotate(rotate(img, 180), 180), img);
    ImageRGB8 r = img;
    for (int i = 0; i < 4; ++i) r = rotate(r, 90);
    EXPECT_EQ(r, img);
    ImageRGB8 once = rotate(img, 90);
    EXPECT_EQ(once.width, 3);
    EXPECT_EQ(once.height, 5);
    EXPECT_EQ(rotate(once, 90), rotate(img, 180));
}

TEST(Rotate, TwoByOne) {
    ImageRGB8 img(2, 1);
    img.px(0, 0)[0] = 10;
    img.px(1, 0)[0] = 20;
    ImageRGB8 r = rotate(img, 90);
    ASSERT_EQ(r.width, 1);
    ASSERT_EQ(r.height, 2);
    // Both source pixels survive as a permutation.
    EXPECT_EQ(r.px(0, 0)[0] + r.px(0, 1)[0], 30);
    EXPECT_NE(r.px(0, 0)[0], r.px(0, 1)[0]);
}

TEST(Rotate, FortyFiveInscribedNoFill) {
    // Checkerboard on values 60/200: any out-of-frame sample would be written as 0.
    ImageRGB8 img(100, 100);
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x) {
            const std::uint8_t v = ((x / 5 + y / 5) % 2) ? 200 : 60;
            std::fill_n(img.px(x, y), 3, v);
        }
    ImageRGB8 r = rotate(img, 45);
    EXPECT_EQ(r.width, static_cast<int>(std::floor(100 / std::sqrt(2.0))));
    EXPECT_EQ(r.height, 70);
    for (auto v : r.data) EXPECT_GE(v, 60);
}

TEST(Rotate, RejectsOtherAngles) {
    ImageRGB8 img(4, 4);
    for (int a : {0, 30, 270, -90}) {
        try {
            rotate(img, a);
            FAIL() << a;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
        }
    }
}

TEST(Resize, IdentityConstantAndRamp) {
    ImageRGB8 img = testutil::random_image(4, 4, 1);
    EXPECT_EQ(resize_bilinear(img, 4, 4), img);

    ImageRGB8 c = testutil::solid(2, 2, 77, 3, 250);
    for (auto [w, h] : {std::pair{5, 9}, std::pair{1, 1}, std::pair{13, 2}})
        EXPECT_EQ(resize_bilinear(c, w, h), testutil::solid(w, h, 77, 3, 250));

    ImageF32 ramp(2, 1, 1);
    ramp.data = {0.0f, 1.0f};
    ImageF32 up = resize_bilinear(ramp, 4, 1);
    const float want[] = {0.0f, 0.25f, 0.75f, 1.0f};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(up.data[i], want[i], 1e-7);
}

TEST(Crop, ExamplesAndComposition) {
    ImageRGB8 img(3, 3);
    for (int i = 0; i < 9; ++i) img.data[i * 3] = static_cast<std::uint8_t>(i + 1);
    ImageRGB8 c = crop(img, 1, 1, 2, 2);
    ASSERT_EQ(c.width, 2);
    EXPECT_EQ(c.px(0, 0)[0], 5);
    EXPECT_EQ(c.px(1, 0)[0], 6);
    EXPECT_EQ(c.px(0, 1)[0], 8);
    EXPECT_EQ(c.px(1, 1)[0], 9);

    ImageRGB8 big = testutil::random_image(20, 15, 4);
    EXPECT_EQ(crop(big, 0, 0, 20, 15), big);
    EXPECT_EQ(crop(crop(big, 3, 2, 12, 10), 4, 1, 5, 6), crop(big, 7, 3, 5, 6));

    EXPECT_THROW(crop(big, 16, 0, 5, 5), Error);
    EXPECT_THROW(crop(big, -1, 0, 5, 5), Error);
    EXPECT_THROW(crop(big, 0, 0, 0, 5), Error);
}

TEST(Purity, RepeatedCallsBitIdentical) {
    ImageRGB8 img = testutil::random_image(31, 17, 12);
    EXPECT_EQ(rotate(img, 45), rotate(img, 45));
    EXPECT_EQ(resize_bilinear(img, 50, 9), resize_bilinear(img, 50, 9));
    BinaryMask m = testutil::random_mask(31, 17, 2);
    EXPECT_EQ(dilate(m, StructuringElement(2, SeShape::Disc)), dilate(m, StructuringElement(2, SeShape::Disc)));
}

TEST(Png, LosslessRoundTrips) {
    testutil::TempDir dir("png");
    ImageRGB8 img = testutil::random_image(13, 7, 5);
    write_rgb(dir.path / "a.png", img);
    EXPECT_EQ(read_rgb(dir.path / "a.png"), img);

    BinaryMask m = testutil::random_mask(13, 7, 6);
    write_binary_mask(dir.path / "m.png", m);
    EXPECT_EQ(read_binary_mask(dir.path / "m.png"), m);

    LabelMask l(5, 4);
    for (std::size_t i = 0; i < l.size(); ++i) l.data[i] = static_cast<std::uint8_t>(i % 32);
    write_label_mask(dir.path / "l.png", l);
    EXPECT_EQ(read_label_mask(dir.path / "l.png"), l);

    Trimap t(3, 2);
    t.data = {TrimapState::Background, TrimapState::Unknown, TrimapState::Foreground,
              TrimapState::Foreground, TrimapState::Unknown, TrimapState::Background};
    write_trimap(dir.path / "t.png", t);
    EXPECT_EQ(read_trimap(dir.path / "t.png"), t);
}

TEST(Png, MissingAndWrongKind) {
    testutil::TempDir dir("png_err");
    EXPECT_THROW(read_rgb(dir.path / "nope.png"), Error);
    write_rgb(dir.path / "rgb.png", testutil::random_image(3, 3, 1));
    EXPECT_THROW(read_binary_mask(dir.path / "rgb.png"), Error);
    LabelMask l(2, 2);
    l.data = {0, 7, 0, 1};
    write_label_mask(dir.path / "l.png", l);
    EXPECT_THROW(read_binary_mask(dir.path / "l.png"), Error);
}
