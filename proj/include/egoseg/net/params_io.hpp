#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "egoseg/net/model.hpp"

// Weight file layout (all integers little-endian):
//   magic     8 bytes  "EGOSEGW\0"
//   version   u32      kWeightFormatVersion
//   count     u32      number of tensors
//   per tensor, in name order:
//     name_len u32, name bytes (no terminator)
//     dtype    u8      1 = float32, 2 = float64
//     rank     u8      always 4 (n, c, h, w)
//     dims     rank x u32
//     payload  prod(dims) values, IEEE-754 little-endian
// Parameters, batch-norm running statistics included; Adam moments are not stored.
namespace egoseg::net {

inline constexpr char kWeightMagic[8] = {'E', 'G', 'O', 'S', 'E', 'G', 'W', '\0'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

template <class T>
constexpr std::uint8_t dtype_tag() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 1 : 2;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string what) : b_(bytes), what_(std::move(what)) {}

    void take(void* dst, std::size_t n, const char* field) {
        require(pos_ + n <= b_.size(), ErrorKind::Format,
                what_ + ": truncated while reading " + field + " at byte " + std::to_string(pos_));
        std::memcpy(dst, b_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32(const char* field) {
        std::uint32_t v;
        take(&v, 4, field);
        return v;
    }
    std::uint8_t u8(const char* field) {
        std::uint8_t v;
        take(&v, 1, field);
        return v;
    }
    bool done() const { return pos_ == b_.size(); }
    const std::string& what() const { return what_; }

private:
    const std::string& b_;
    std::string what_;
    std::size_t pos_ = 0;
};

} // namespace detail

template <class T>
std::string serialize_params(const Params<T>& p) {
    std::string out(kWeightMagic, 8);
    detail::put_u32(out, kWeightFormatVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(p.entries.size()));
    for (const auto& [name, e] : p.entries) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(dtype_tag<T>()));
        out.push_back(4);
        for (int d : {e.value.n(), e.value.c(), e.value.h(), e.value.w()}) detail::put_u32(out, static_cast<std::uint32_t>(d));
        out.append(reinterpret_cast<const char*>(e.value.data.data()), e.value.size() * sizeof(T));
    }
    return out;
}

template <class T>
void save_params(const std::filesystem::path& path, const Params<T>& p) {
    const std::string bytes = serialize_params(p);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(f.good(), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

/// Every tensor in a weight blob, converted to T. Throws on any structural problem, so callers
/// never see a partially parsed file.
template <class T>
std::map<std::string, Tensor4<T>> parse_weight_blob(const std::string& bytes, const std::string& what) {
    detail::ByteReader r(bytes, what);
    char magic[8];
    r.take(magic, 8, "magic");
    require(std::memcmp(magic, kWeightMagic, 8) == 0, ErrorKind::Format, what + ": not a weight file (bad magic)");
    const std::uint32_t version = r.u32("version");
    require(version == kWeightFormatVersion, ErrorKind::Format,
            what + ": unsupported weight format version " + std::to_string(version));
    const std::uint32_t count = r.u32("tensor count");
    std::map<std::string, Tensor4<T>> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32("name length");
        require(len > 0 && len < 4096, ErrorKind::Format, what + ": implausible name length " + std::to_string(len));
        std::string name(len, '\0');
        r.take(name.data(), len, "name");
        const std::uint8_t dtype = r.u8("dtype");
        require(dtype == 1 || dtype == 2, ErrorKind::Format, what + ": tensor '" + name + "' has unknown dtype tag " + std::to_string(dtype));
        const std::uint8_t rank = r.u8("rank");
        require(rank == 4, ErrorKind::Format, what + ": tensor '" + name + "' has rank " + std::to_string(rank) + ", expected 4");
        Shape4 s;
        s.n = static_cast<int>(r.u32("dims"));
        s.c = static_cast<int>(r.u32("dims"));
        s.h = static_cast<int>(r.u32("dims"));
        s.w = static_cast<int>(r.u32("dims"));
        require(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0 && s.count() < (std::size_t{1} << 32), ErrorKind::Format,
                what + ": tensor '" + name + "' has implausible dims " + s.str());
        Tensor4<T> t(s);
        if (dtype == 1) {
            std::vector<float> v(s.count());
            r.take(v.data(), v.size() * sizeof(float), "payload");
            std::copy(v.begin(), v.end(), t.data.begin());
        } else {
            std::vector<double> v(s.count());
            r.take(v.data(), v.size() * sizeof(double), "payload");
            for (std::size_t k = 0; k < v.size(); ++k) t.data[k] = static_cast<T>(v[k]);
        }
        require(out.emplace(name, std::move(t)).second, ErrorKind::Format, what + ": duplicate tensor '" + name + "'");
    }
    require(r.done(), ErrorKind::Format, what + ": trailing bytes after the last tensor");
    return out;
}

enum class LoadMode { Strict, EncoderOnly };

/// Strict: the file must carry exactly the layout of `cfg`. EncoderOnly: encoder tensors are
/// taken from the file (which must contain all of them); everything else is freshly initialised
/// from `init_seed`.
template <class T>
Params<T> load_params(const std::filesystem::path& path, const NetConfig& cfg, LoadMode mode = LoadMode::Strict,
                      std::uint64_t init_seed = 0) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::Io, "cannot open weight file '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    auto file = parse_weight_blob<T>(bytes, "weight file '" + path.string() + "'");
    Params<T> p = mode == LoadMode::Strict ? param_layout<T>(cfg) : init_params<T>(cfg, init_seed);
    for (auto& [name, e] : p.entries) {
        if (mode == LoadMode::EncoderOnly && !is_encoder_param(name)) continue;
        auto it = file.find(name);
        require(it != file.end(), ErrorKind::Format, "weight file '" + path.string() + "' lacks layer '" + name + "'");
        require(it->second.shape == e.value.shape, ErrorKind::Format,
                "weight file '" + path.string() + "': layer '" + name + "' has shape " + it->second.shape.str() +
                    " but the network config expects " + e.value.shape.str());
        e.value = std::move(it->second);
        file.erase(it);
    }
    if (mode == LoadMode::Strict)
        require(file.empty(), ErrorKind::Format,
                "weight file '" + path.string() + "' has layer '" + (file.empty() ? "" : file.begin()->first) +
                    "' that the network config does not define");
    return p;
}

/// Encoder tensors only, e.g. to seed a new model.
template <class T>
void save_encoder_params(const std::filesystem::path& path, const Params<T>& p) {
    Params<T> enc;
    for (const auto& [name, e] : p.entries)
        if (is_encoder_param(name)) enc.entries.emplace(name, e);
    save_params(path, enc);
}

} // namespace egoseg::net
