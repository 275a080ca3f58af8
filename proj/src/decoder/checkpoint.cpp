#include "lrep/decoder/checkpoint.hpp"

#include <cstdio>

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/lrep_io.hpp"

namespace lrep::decoder {

namespace le = representation::le;

nlohmann::json model_config_json(const DecoderParams& params, AttentionMode mode) {
    return {{"decoder", params.config.to_json()},
            {"registry", params.registry.to_json()},
            {"mode", std::string(to_string(mode))}};
}

std::uint64_t config_digest(const nlohmann::json& config) { return numerics::fnv1a64(config.dump()); }

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

std::string encode_checkpoint(const DecoderParams& params, AttentionMode mode, const nlohmann::json& metadata) {
    nlohmann::json config = model_config_json(params, mode);
    if (!metadata.empty()) config["metadata"] = metadata;
    const std::string config_text = config.dump();

    std::string out(kCheckpointMagic, 4);
    le::put_u16(out, kCheckpointVersion);
    // Digest covers the model identity only, so metadata does not affect compatibility.
    le::put_u64(out, config_digest(model_config_json(params, mode)));
    le::put_u32(out, static_cast<std::uint32_t>(config_text.size()));
    out += config_text;
    le::put_u32(out, static_cast<std::uint32_t>(params.store.size()));
    for (std::size_t i = 0; i < params.store.size(); ++i) {
        const std::string& name = params.store.name(i);
        const Matrix& m = params.store.at(i);
        le::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        le::put_u32(out, static_cast<std::uint32_t>(m.rows()));
        le::put_u32(out, static_cast<std::uint32_t>(m.cols()));
        for (double x : m.data()) le::put_f32(out, static_cast<float>(x));
    }
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, std::optional<std::uint64_t> expected_digest) {
    le::Reader r(bytes);
    if (r.take(4) != std::string_view(kCheckpointMagic, 4)) throw FormatError("bad magic, expected LRCK");
    const auto version = r.u16();
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.digest = r.u64();
    const auto config_len = r.u32();
    try {
        ck.config = nlohmann::json::parse(r.take(config_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config is not JSON: ") + e.what());
    }
    if (!ck.config.contains("decoder") || !ck.config.contains("registry") || !ck.config.contains("mode")) {
        throw FormatError("checkpoint config lacks decoder/registry/mode");
    }
    const nlohmann::json identity = {
        {"decoder", ck.config["decoder"]}, {"registry", ck.config["registry"]}, {"mode", ck.config["mode"]}};
    if (config_digest(identity) != ck.digest) {
        throw FormatError("checkpoint digest " + digest_hex(ck.digest) + " does not match its config (" +
                          digest_hex(config_digest(identity)) + ")");
    }
    if (expected_digest && *expected_digest != ck.digest) {
        throw ConfigError("checkpoint digest " + digest_hex(ck.digest) + " does not match expected " +
                          digest_hex(*expected_digest));
    }
    ck.mode = attention_mode_from_string(ck.config["mode"].get<std::string>());
    // Rebuild the expected layout, then fill it from the file.
    ck.params = init_params(DecoderConfig::from_json(ck.config["decoder"]),
                            representation::registry_from_json(ck.config["registry"]), 0);
    const auto count = r.u32();
    if (count != ck.params.store.size()) {
        throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(ck.params.store.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name(r.take(r.u16()));
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (!ck.params.store.contains(name)) throw FormatError("unexpected tensor '" + name + "'");
        Matrix& m = ck.params.store.at(name);
        if (m.rows() != rows || m.cols() != cols) {
            throw FormatError("tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                              ", config implies " + m.shape_string());
        }
        for (double& x : m.data()) x = static_cast<double>(r.f32());
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint tensors");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const DecoderParams& params, AttentionMode mode,
                     const nlohmann::json& metadata) {
    representation::write_file(path, encode_checkpoint(params, mode, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_digest) {
    try {
        return decode_checkpoint(representation::read_file(path), expected_digest);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace lrep::decoder
