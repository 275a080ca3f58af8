#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>

#include "lrep/representation/provider.hpp"

namespace lrep::representation {

struct RemoteConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::chrono::milliseconds timeout{30000};
    int retries = 3;
    /// Delay before retry k (0-based) is backoff * 2^k.
    std::chrono::milliseconds backoff{500};
};

struct RemotePayload {
    std::string type;  // "text" or "image_path"
    std::string payload;
};

using PayloadResolver =
    std::function<RemotePayload(std::string_view episode_id, std::string_view phase, const SourceSpec&)>;

/// Instruction text per episode id.
using InstructionLookup = std::map<std::string, std::string, std::less<>>;

/// Text sources embed the instruction or the caption sidecar; image sources
/// send <image_root>/<episode>/<phase>.png.
PayloadResolver default_payload_resolver(std::filesystem::path image_root,
                                         std::filesystem::path caption_root,
                                         InstructionLookup instructions);

/// Fetches blocks from POST /v1/embed and caches them under `cache_root` in
/// the LREP layout; cached blocks are served without a request.
class RemoteProvider final : public EmbeddingProvider {
public:
    RemoteProvider(RemoteConfig config, SourceRegistry registry, std::filesystem::path cache_root,
                   PayloadResolver resolver);

    FeatureBlock get(std::string_view episode_id, std::string_view phase,
                     std::string_view source_id) const override;
    /// Caption sidecars are read from the cache root.
    std::optional<std::string> caption(std::string_view episode_id,
                                       std::string_view phase) const override;

    std::size_t requests_sent() const;

private:
    FeatureBlock fetch(std::string_view episode_id, std::string_view phase, const SourceSpec& spec) const;

    RemoteConfig config_;
    SourceRegistry registry_;
    FileProvider cache_;
    PayloadResolver resolver_;
    mutable std::mutex mutex_;
    mutable std::size_t requests_ = 0;
};

}  // namespace lrep::representation
