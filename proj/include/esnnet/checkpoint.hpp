#pragma once

// Model checkpoints: little-endian binary with a versioned header, a
// parameter manifest and per-tensor CRC32 checksums, so a round trip is
// bit-exact. Layout (all integers little-endian):
//
//   magic   "ESNNETCK" (8 bytes)
//   u32     format version (1)
//   u32     endian marker 0x01020304
//   u8      scalar width in bytes (4 = float, 8 = double)
//   u8      variant (0 = full, 1 = conv-only)
//   u64     build seed
//   u32     config blob length, followed by that many bytes (JSON)
//   u32     tensor count, then per tensor:
//             u32 name length + name bytes
//             u32 rank, u64 dims[rank]
//             u32 crc32 of the raw data
//             raw scalar data (numel * width bytes)

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "esnnet/model.hpp"

namespace esnnet {

/// CRC-32 (IEEE 802.3 polynomial, reflected).
inline std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = ~seed;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

namespace detail {

inline constexpr char kMagic[8] = {'E', 'S', 'N', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kEndianMark = 0x01020304;

template <typename V>
void write_pod(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is, const char* what) {
    V v;
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw IoError(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const char* what) {
    const auto len = read_pod<std::uint32_t>(is, what);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw IoError(std::string("checkpoint: truncated while reading ") + what);
    return s;
}

}  // namespace detail

/// `config_json` is the caller's serialized ModelConfig; it is stored verbatim
/// and handed back on load so the model can be rebuilt before the tensors are
/// overwritten.
template <Scalar T>
void save_checkpoint(EsnNet<T>& model, const std::string& config_json, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
    os.write(detail::kMagic, sizeof(detail::kMagic));
    detail::write_pod<std::uint32_t>(os, detail::kVersion);
    detail::write_pod<std::uint32_t>(os, detail::kEndianMark);
    detail::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(sizeof(T)));
    detail::write_pod<std::uint8_t>(os, model.variant() == Variant::full ? 0 : 1);
    detail::write_pod<std::uint64_t>(os, model.build_seed());
    detail::write_string(os, config_json);

    const auto tensors = model.state_tensors();
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        detail::write_string(os, name);
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensor->rank()));
        for (std::size_t a = 0; a < tensor->rank(); ++a)
            detail::write_pod<std::uint64_t>(os, tensor->extent(a));
        const std::size_t bytes = tensor->numel() * sizeof(T);
        detail::write_pod<std::uint32_t>(os, crc32(tensor->data(), bytes));
        os.write(reinterpret_cast<const char*>(tensor->data()),
                 static_cast<std::streamsize>(bytes));
    }
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

struct CheckpointHeader {
    std::uint32_t version = 0;
    std::uint8_t scalar_width = 0;
    Variant variant = Variant::full;
    std::uint64_t build_seed = 0;
    std::string config_json;
};

/// Reads and validates the header, leaving the stream at the tensor manifest.
inline CheckpointHeader read_checkpoint_header(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, detail::kMagic, sizeof(magic)) != 0)
        throw IoError("checkpoint: bad magic bytes in " + path + " (not an ESNNet checkpoint)");
    CheckpointHeader h;
    h.version = detail::read_pod<std::uint32_t>(is, "version");
    if (h.version != detail::kVersion)
        throw IoError("checkpoint: unsupported format version " + std::to_string(h.version));
    const auto mark = detail::read_pod<std::uint32_t>(is, "endian marker");
    if (mark != detail::kEndianMark)
        throw IoError("checkpoint: endianness mismatch (file written on incompatible platform)");
    h.scalar_width = detail::read_pod<std::uint8_t>(is, "scalar width");
    const auto variant = detail::read_pod<std::uint8_t>(is, "variant");
    if (variant > 1) throw IoError("checkpoint: unknown variant tag");
    h.variant = variant == 0 ? Variant::full : Variant::conv_only;
    h.build_seed = detail::read_pod<std::uint64_t>(is, "build seed");
    h.config_json = detail::read_string(is, "config blob");
    return h;
}

/// Overwrites the tensors of an already-rebuilt model from the manifest.
template <Scalar T>
void load_checkpoint_tensors(std::istream& is, EsnNet<T>& model, const std::string& path) {
    const auto count = detail::read_pod<std::uint32_t>(is, "tensor count");
    auto tensors = model.state_tensors();
    if (count != tensors.size())
        throw IoError("checkpoint: manifest lists " + std::to_string(count) + " tensors, model has " +
                      std::to_string(tensors.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = detail::read_string(is, "tensor name");
        if (name != tensors[i].first)
            throw IoError("checkpoint: tensor #" + std::to_string(i) + " is '" + name +
                          "', expected '" + tensors[i].first + "'");
        Tensor<T>& dst = *tensors[i].second;
        const auto rank = detail::read_pod<std::uint32_t>(is, "tensor rank");
        if (rank != dst.rank()) throw IoError("checkpoint: rank mismatch for " + name);
        for (std::uint32_t a = 0; a < rank; ++a) {
            const auto dim = detail::read_pod<std::uint64_t>(is, "tensor dim");
            if (dim != dst.extent(a)) throw IoError("checkpoint: shape mismatch for " + name);
        }
        const auto stored_crc = detail::read_pod<std::uint32_t>(is, "tensor crc");
        const std::size_t bytes = dst.numel() * sizeof(T);
        is.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(bytes));
        if (!is) throw IoError("checkpoint: truncated tensor data for " + name + " in " + path);
        if (crc32(dst.data(), bytes) != stored_crc)
            throw IoError("checkpoint: checksum failure for " + name + " in " + path);
    }
}

}  // namespace esnnet
