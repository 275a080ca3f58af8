#include "lrep/representation/lrep_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lrep/errors.hpp"

namespace lrep::representation {

namespace le {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::string_view Reader::take(std::size_t n) {
    if (n > remaining()) {
        throw FormatError("truncated data: need " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::uint16_t Reader::u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                      (static_cast<unsigned char>(b[1]) << 8));
}

std::uint32_t Reader::u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
}

std::uint64_t Reader::u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

}  // namespace le

std::string encode_block(const FeatureBlock& block) {
    if (block.source_id.size() > 0xffff) throw FormatError("source id too long");
    std::string out(kBlockMagic, 4);
    le::put_u16(out, kBlockVersion);
    le::put_u16(out, static_cast<std::uint16_t>(block.source_id.size()));
    out += block.source_id;
    le::put_u32(out, static_cast<std::uint32_t>(block.values.size()));
    for (float v : block.values) le::put_f32(out, v);
    return out;
}

FeatureBlock decode_block(std::string_view bytes, Provenance provenance) {
    le::Reader r(bytes);
    if (r.take(4) != std::string_view(kBlockMagic, 4)) throw FormatError("bad magic, expected LREP");
    const auto version = r.u16();
    if (version != kBlockVersion) {
        throw FormatError("unsupported LREP version " + std::to_string(version));
    }
    FeatureBlock block;
    block.provenance = provenance;
    block.source_id = std::string(r.take(r.u16()));
    const std::uint32_t dim = r.u32();
    if (dim == 0) throw FormatError("block '" + block.source_id + "' has zero dim");
    if (r.remaining() != static_cast<std::size_t>(dim) * 4) {
        throw FormatError("block '" + block.source_id + "' declares dim " + std::to_string(dim) +
                          " but carries " + std::to_string(r.remaining()) + " payload bytes");
    }
    block.values.resize(dim);
    for (float& v : block.values) v = r.f32();
    return block;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_block(const std::filesystem::path& path, const FeatureBlock& block) {
    write_file(path, encode_block(block));
}

FeatureBlock read_block(const std::filesystem::path& path, Provenance provenance) {
    try {
        return decode_block(read_file(path), provenance);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::filesystem::path block_path(const std::filesystem::path& root, std::string_view episode_id,
                                 std::string_view phase, std::string_view source_id) {
    return root / std::string(episode_id) / std::string(phase) / (std::string(source_id) + ".lrep");
}

std::filesystem::path caption_path(const std::filesystem::path& root, std::string_view episode_id,
                                   std::string_view phase) {
    return root / std::string(episode_id) / (std::string(phase) + ".caption.txt");
}

}  // namespace lrep::representation
