#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lrep/decoder/params.hpp"

// Checkpoint layout (little-endian):
//   "LRCK" | u16 version (=1) | u64 config digest | u32 config length | config JSON
//   | u32 tensor count | per tensor: u16 name length | name | u32 rows | u32 cols | rows*cols f32
// The digest is FNV-1a 64 over the config JSON bytes.

namespace lrep::decoder {

inline constexpr char kCheckpointMagic[4] = {'L', 'R', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    DecoderParams params;
    AttentionMode mode = AttentionMode::cross;
    /// Full model config: decoder dims, registry, mode, plus caller metadata.
    nlohmann::json config;
    std::uint64_t digest = 0;
};

/// The JSON that identifies a model: decoder config, registry and mode.
nlohmann::json model_config_json(const DecoderParams& params, AttentionMode mode);
std::uint64_t config_digest(const nlohmann::json& config);
std::string digest_hex(std::uint64_t digest);

std::string encode_checkpoint(const DecoderParams& params, AttentionMode mode,
                              const nlohmann::json& metadata = nlohmann::json::object());
/// Rejects a stored digest that does not match the stored config, and, when
/// `expected_digest` is given, any checkpoint with a different digest.
Checkpoint decode_checkpoint(std::string_view bytes,
                             std::optional<std::uint64_t> expected_digest = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const DecoderParams& params, AttentionMode mode,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_digest = std::nullopt);

}  // namespace lrep::decoder
