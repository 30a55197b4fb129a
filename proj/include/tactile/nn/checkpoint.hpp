#pragma once

// Checkpoint container, version 1. All integers are unsigned 32-bit little endian.
//
//   magic        4 bytes  "TKCP"
//   version      u32      1
//   meta_len     u32      length of the metadata blob
//   meta         bytes    UTF-8 text (the trainer stores JSON here)
//   count        u32      number of parameters
//   count times:
//     name_len   u32
//     name       bytes
//     rank       u32
//     dims       rank x u32
//     payload    prod(dims) x IEEE-754 binary32, little endian
//
// See docs/checkpoint-format.md.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "tactile/nn/param_store.hpp"

namespace tactile::nn {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        require(pos_ + n <= data_.size(), ErrorKind::IoError, "checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
std::string encode_checkpoint(const ParamStore<T>& store, const std::string& meta) {
    std::string out = "TKCP";
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out += meta;
    detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& p = store[i];
        detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        detail::put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
        for (int d : p.value.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (T x : p.value.data) detail::put_f32(out, static_cast<float>(x));
    }
    return out;
}

struct DecodedCheckpoint {
    std::string meta;
    ParamStore<float> params;
};

inline DecodedCheckpoint decode_checkpoint(std::string bytes) {
    require(bytes.size() >= 4 && bytes.compare(0, 4, "TKCP") == 0, ErrorKind::IoError, "not a checkpoint (bad magic)");
    detail::Reader r(bytes.substr(4));
    const auto version = r.u32();
    require(version == kCheckpointVersion, ErrorKind::IoError, "unsupported checkpoint version " + std::to_string(version));
    DecodedCheckpoint out;
    out.meta = r.bytes(r.u32());
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.bytes(r.u32());
        const auto rank = r.u32();
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
        Tensor<float> t(shape);
        for (auto& x : t.data) x = r.f32();
        out.params.add(name, std::move(t));
    }
    require(r.done(), ErrorKind::IoError, "trailing bytes after checkpoint payload");
    return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store, const std::string& meta) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::IoError, "cannot write " + path.string());
    const std::string bytes = encode_checkpoint(store, meta);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline DecodedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::MissingFile, "cannot open checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(std::move(bytes));
}

}  // namespace tactile::nn
