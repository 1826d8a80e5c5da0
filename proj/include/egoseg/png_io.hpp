#pragma once

#include <png.h>

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "egoseg/image.hpp"

namespace egoseg::png {

struct Raw {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 = gray, 3 = rgb
    std::vector<std::uint8_t> data;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void on_error(png_structp, png_const_charp msg) { throw Error(ErrorKind::Format, msg); }
inline void on_warning(png_structp, png_const_charp) {}

} // namespace detail

/// Decodes any 8/16-bit PNG into 8-bit gray or RGB (alpha dropped, palette expanded).
inline Raw read(const std::filesystem::path& path) {
    detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    require(fp != nullptr, ErrorKind::Io, "cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
    png_infop info = png_create_info_struct(png);
    Raw raw;
    try {
        png_init_io(png, fp.get());
        png_read_info(png, info);
        png_set_strip_16(png);
        png_set_strip_alpha(png);
        png_set_packing(png);
        png_set_expand(png);
        png_read_update_info(png, info);
        raw.width = static_cast<int>(png_get_image_width(png, info));
        raw.height = static_cast<int>(png_get_image_height(png, info));
        raw.channels = png_get_channels(png, info);
        require(raw.channels == 1 || raw.channels == 3, ErrorKind::Format, "unsupported PNG channel layout in " + path.string());
        const std::size_t stride = png_get_rowbytes(png, info);
        raw.data.resize(stride * raw.height);
        std::vector<png_bytep> rows(raw.height);
        for (int y = 0; y < raw.height; ++y) rows[y] = raw.data.data() + stride * y;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (const Error& e) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

/// Encoder settings are fixed (zlib level 6, no filter heuristics, no timestamps) so output bytes are reproducible.
inline void write(const std::filesystem::path& path, int width, int height, int channels,
                  const std::uint8_t* data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    require(fp != nullptr, ErrorKind::Io, "cannot create " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, fp.get());
        png_set_compression_level(png, 6);
        png_set_filter(png, 0, PNG_FILTER_NONE);
        png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(width) * channels;
        for (int y = 0; y < height; ++y) png_write_row(png, data + stride * y);
        png_write_end(png, nullptr);
    } catch (const Error& e) {
        png_destroy_write_struct(&png, &info);
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
    png_destroy_write_struct(&png, &info);
}

} // namespace egoseg::png

namespace egoseg {

inline ImageRGB8 read_rgb(const std::filesystem::path& path) {
    png::Raw raw = png::read(path);
    if (raw.channels == 3) return ImageRGB8(raw.width, raw.height, std::move(raw.data));
    ImageRGB8 out(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.data.size(); ++i) out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = raw.data[i];
    return out;
}

inline void write_rgb(const std::filesystem::path& path, const ImageRGB8& img) {
    png::write(path, img.width, img.height, 3, img.data.data());
}

namespace detail {

inline png::Raw read_gray(const std::filesystem::path& path) {
    png::Raw raw = png::read(path);
    require(raw.channels == 1, ErrorKind::Format, path.string() + ": expected an 8-bit grayscale mask");
    return raw;
}

} // namespace detail

/// Binary masks are written as 0/255; reading accepts 0/1 or 0/255.
inline BinaryMask read_binary_mask(const std::filesystem::path& path) {
    const png::Raw raw = detail::read_gray(path);
    BinaryMask m(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const std::uint8_t v = raw.data[i];
        require(v == 0 || v == 1 || v == 255, ErrorKind::Format,
                path.string() + ": binary mask contains value " + std::to_string(v));
        m.data[i] = v ? 1 : 0;
    }
    return m;
}

inline void write_binary_mask(const std::filesystem::path& path, const BinaryMask& m) {
    std::vector<std::uint8_t> bytes(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) bytes[i] = m.data[i] ? 255 : 0;
    png::write(path, m.width, m.height, 1, bytes.data());
}

/// Label masks store the class id as the pixel value.
inline LabelMask read_label_mask(const std::filesystem::path& path) {
    png::Raw raw = detail::read_gray(path);
    LabelMask m(raw.width, raw.height);
    m.data = std::move(raw.data);
    return m;
}

inline void write_label_mask(const std::filesystem::path& path, const LabelMask& m) {
    png::write(path, m.width, m.height, 1, m.data.data());
}

inline Trimap read_trimap(const std::filesystem::path& path) {
    const png::Raw raw = detail::read_gray(path);
    Trimap t(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const std::uint8_t v = raw.data[i];
        require(v == 0 || v == 128 || v == 255, ErrorKind::Format,
                path.string() + ": trimap contains value " + std::to_string(v) + " (expected 0/128/255)");
        t.data[i] = static_cast<TrimapState>(v);
    }
    return t;
}

inline void write_trimap(const std::filesystem::path& path, const Trimap& t) {
    std::vector<std::uint8_t> bytes(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) bytes[i] = static_cast<std::uint8_t>(t.data[i]);
    png::write(path, t.width, t.height, 1, bytes.data());
}

inline AlphaMask read_alpha(const std::filesystem::path& path) {
    const png::Raw raw = detail::read_gray(path);
    AlphaMask a(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.data.size(); ++i) a.data[i] = to_unit(raw.data[i]);
    return a;
}

inline void write_alpha(const std::filesystem::path& path, const AlphaMask& a) {
    std::vector<std::uint8_t> bytes(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) bytes[i] = to_byte(a.data[i]);
    png::write(path, a.width, a.height, 1, bytes.data());
}

} // namespace egoseg
