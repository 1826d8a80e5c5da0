#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "egoseg/image.hpp"

namespace testutil {

inline egoseg::BinaryMask random_mask(int w, int h, std::uint64_t seed, double p = 0.5) {
    std::mt19937_64 g(seed);
    std::bernoulli_distribution d(p);
    egoseg::BinaryMask m(w, h);
    for (auto& v : m.data) v = d(g) ? 1 : 0;
    return m;
}

inline egoseg::ImageRGB8 random_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> d(0, 255);
    egoseg::ImageRGB8 img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(d(g));
    return img;
}

inline egoseg::ImageRGB8 solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    egoseg::ImageRGB8 img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.px(x, y)[0] = r;
            img.px(x, y)[1] = g;
            img.px(x, y)[2] = b;
        }
    return img;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("egoseg_test_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

} // namespace testutil
