#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lrep/representation/feature_block.hpp"

// Embedding file codec. Little-endian layout:
//   "LREP" | u16 version (=1) | u16 id length | id bytes (UTF-8) | u32 dim | dim x f32

namespace lrep::representation {

inline constexpr char kBlockMagic[4] = {'L', 'R', 'E', 'P'};
inline constexpr std::uint16_t kBlockVersion = 1;

std::string encode_block(const FeatureBlock& block);
/// Provenance of the decoded block is `provenance`; the file does not store it.
FeatureBlock decode_block(std::string_view bytes, Provenance provenance = Provenance::file);

void write_block(const std::filesystem::path& path, const FeatureBlock& block);
FeatureBlock read_block(const std::filesystem::path& path, Provenance provenance = Provenance::file);

/// <root>/<episode_id>/<phase>/<source_id>.lrep
std::filesystem::path block_path(const std::filesystem::path& root, std::string_view episode_id,
                                 std::string_view phase, std::string_view source_id);
/// <root>/<episode_id>/<phase>.caption.txt
std::filesystem::path caption_path(const std::filesystem::path& root, std::string_view episode_id,
                                   std::string_view phase);

// Little-endian primitives shared with the checkpoint codec.
namespace le {
void put_u16(std::string& out, std::uint16_t v);
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);

/// Bounds-checked cursor; throws FormatError on truncation.
class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    std::string_view take(std::size_t n);
    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};
}  // namespace le

std::string read_file(const std::filesystem::path& path);
/// Creates parent directories, then writes atomically via a temp file + rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace lrep::representation
