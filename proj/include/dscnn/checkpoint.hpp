#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dscnn/model.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

/// CRC-32 (IEEE) over a byte range.
inline std::uint32_t crc32_bytes(const unsigned char* data, std::size_t len,
                                 std::uint32_t crc = 0xFFFFFFFFu) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc;
}

inline std::uint32_t crc32_final(std::uint32_t crc) { return crc ^ 0xFFFFFFFFu; }

inline std::uint32_t crc32_of_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::uint32_t crc = 0xFFFFFFFFu;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        crc = crc32_bytes(reinterpret_cast<const unsigned char*>(buf),
                          static_cast<std::size_t>(in.gcount()), crc);
    return crc32_final(crc);
}

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

/// Sequential reader that reports the byte offset of any failure.
struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos) +
                                     " while reading " + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

struct CheckpointEntry {
    std::string name;
    Tensor tensor;
};

struct CheckpointData {
    std::uint16_t version = 1;
    std::string spec_json;
    std::vector<CheckpointEntry> entries;

    const Tensor& at(const std::string& name) const {
        for (const CheckpointEntry& e : entries)
            if (e.name == name) return e.tensor;
        throw std::invalid_argument("checkpoint has no entry '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const CheckpointEntry& e : entries)
            if (e.name == name) return true;
        return false;
    }
};

/// Serializes named tensors with a model-spec blob:
/// "DSC1", version u16, u32 blob length + UTF-8 blob, u32 entry count,
/// then per entry (u16 name length + name, u8 rank, u32 extents,
/// little-endian f32 payload), closed by a CRC32 of all preceding bytes.
inline void save_checkpoint(const std::string& path, const std::string& spec_json,
                            const std::vector<std::pair<std::string, const Tensor*>>& entries,
                            std::uint16_t version = 1) {
    std::string out;
    out += "DSC1";
    detail::put_u16(out, version);
    detail::put_u32(out, static_cast<std::uint32_t>(spec_json.size()));
    out += spec_json;
    detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) {
        if (name.size() > 0xFFFF) throw std::invalid_argument("entry name too long: " + name);
        if (tensor->rank() > 0xFF) throw std::invalid_argument("entry rank too large: " + name);
        detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(tensor->rank()));
        for (int d = 0; d < tensor->rank(); ++d)
            detail::put_u32(out, static_cast<std::uint32_t>(tensor->dim(d)));
        for (std::size_t i = 0; i < tensor->size(); ++i) detail::put_f32(out, (*tensor)[i]);
    }
    const std::uint32_t crc =
        crc32_final(crc32_bytes(reinterpret_cast<const unsigned char*>(out.data()), out.size()));
    detail::put_u32(out, crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

inline void save_checkpoint(const std::string& path, const std::string& spec_json,
                            const std::vector<ParamRef>& params, std::uint16_t version = 1) {
    std::vector<std::pair<std::string, const Tensor*>> entries;
    entries.reserve(params.size());
    for (const ParamRef& p : params) entries.emplace_back(p.name, p.value);
    save_checkpoint(path, spec_json, entries, version);
}

inline CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 4 + 2 + 4 + 4 + 4)
        throw std::runtime_error("checkpoint truncated at byte " + std::to_string(buf.size()) +
                                 ": shorter than the fixed header");
    const std::uint32_t stored_crc =
        static_cast<std::uint8_t>(buf[buf.size() - 4]) |
        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[buf.size() - 3])) << 8) |
        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[buf.size() - 2])) << 16) |
        (static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[buf.size() - 1])) << 24);
    const std::uint32_t actual_crc = crc32_final(
        crc32_bytes(reinterpret_cast<const unsigned char*>(buf.data()), buf.size() - 4));
    if (stored_crc != actual_crc)
        throw std::runtime_error("checkpoint CRC mismatch in '" + path + "'");

    detail::ByteReader r{buf};
    if (r.bytes(4, "magic") != "DSC1")
        throw std::runtime_error("bad checkpoint magic at byte 0 in '" + path + "'");
    CheckpointData data;
    data.version = r.u16("version");
    const std::uint32_t blob_len = r.u32("spec blob length");
    data.spec_json = r.bytes(blob_len, "spec blob");
    const std::uint32_t count = r.u32("entry count");
    data.entries.reserve(count);
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t name_len = r.u16("entry name length");
        CheckpointEntry entry;
        entry.name = r.bytes(name_len, "entry name");
        const std::uint8_t rank = r.u8("entry rank");
        std::vector<int> shape;
        std::size_t total = 1;
        for (int d = 0; d < rank; ++d) {
            const std::uint32_t ext = r.u32("entry extent");
            if (ext == 0 || ext > (1u << 30))
                throw std::runtime_error("checkpoint entry '" + entry.name + "' has bad extent at byte " +
                                         std::to_string(r.pos - 4));
            shape.push_back(static_cast<int>(ext));
            total *= ext;
        }
        r.need(total * 4, "entry payload");
        Tensor t(shape);
        for (std::size_t i = 0; i < total; ++i) {
            std::uint32_t bits = r.u32("entry payload");
            float v;
            std::memcpy(&v, &bits, 4);
            t[i] = v;
        }
        entry.tensor = std::move(t);
        data.entries.push_back(std::move(entry));
    }
    if (r.pos != buf.size() - 4)
        throw std::runtime_error("checkpoint has " + std::to_string(buf.size() - 4 - r.pos) +
                                 " unexpected trailing bytes at byte " + std::to_string(r.pos));
    return data;
}

/// Copies every loaded entry into the matching parameter reference;
/// entry set and reference set must agree exactly.
inline void apply_checkpoint(const CheckpointData& data, std::vector<ParamRef>& refs) {
    if (data.entries.size() != refs.size())
        throw std::invalid_argument("checkpoint has " + std::to_string(data.entries.size()) +
                                    " entries but the model has " + std::to_string(refs.size()) +
                                    " parameters");
    for (ParamRef& ref : refs) {
        const Tensor& src = data.at(ref.name);
        if (!src.same_shape(*ref.value))
            throw std::invalid_argument("checkpoint entry '" + ref.name + "' has shape " + shape_str(src) +
                                        " but the model expects " + shape_str(*ref.value));
        std::copy(src.data(), src.data() + src.size(), ref.value->data());
    }
}

}  // namespace dscnn
