#include "lrep/representation/remote_provider.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lrep/errors.hpp"
#include "lrep/representation/lrep_io.hpp"

namespace lrep::representation {

PayloadResolver default_payload_resolver(std::filesystem::path image_root,
                                         std::filesystem::path caption_root,
                                         InstructionLookup instructions) {
    return [image_root = std::move(image_root), captions = FileProvider(std::move(caption_root)),
            instructions = std::move(instructions)](std::string_view episode_id,
                                                    std::string_view phase,
                                                    const SourceSpec& spec) -> RemotePayload {
        switch (spec.group) {
            case Group::instruction: {
                auto it = instructions.find(episode_id);
                if (it == instructions.end()) {
                    throw MissingFeatureError(std::string(episode_id), std::string(phase), spec.id);
                }
                return {"text", it->second};
            }
            case Group::narrative: {
                auto text = captions.caption(episode_id, phase);
                if (!text) throw MissingCaptionError(std::string(episode_id), std::string(phase));
                return {"text", *text};
            }
            case Group::scene:
            case Group::aligned:
                break;
        }
        const auto path = image_root / std::string(episode_id) / (std::string(phase) + ".png");
        return {"image_path", path.string()};
    };
}

RemoteProvider::RemoteProvider(RemoteConfig config, SourceRegistry registry,
                               std::filesystem::path cache_root, PayloadResolver resolver)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      cache_(std::move(cache_root)),
      resolver_(std::move(resolver)) {}

std::size_t RemoteProvider::requests_sent() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::optional<std::string> RemoteProvider::caption(std::string_view episode_id,
                                                   std::string_view phase) const {
    return cache_.caption(episode_id, phase);
}

FeatureBlock RemoteProvider::get(std::string_view episode_id, std::string_view phase,
                                 std::string_view source_id) const {
    const SourceSpec* spec = registry_.find(source_id);
    if (!spec) {
        throw MissingFeatureError(std::string(episode_id), std::string(phase), std::string(source_id));
    }
    std::lock_guard lock(mutex_);
    const auto path = block_path(cache_.root(), episode_id, phase, source_id);
    if (std::filesystem::exists(path)) {
        FeatureBlock cached = read_block(path, Provenance::remote);
        if (cached.dim() == spec->dim) return cached;
    }
    FeatureBlock block = fetch(episode_id, phase, *spec);
    write_block(path, block);
    return block;
}

FeatureBlock RemoteProvider::fetch(std::string_view episode_id, std::string_view phase,
                                   const SourceSpec& spec) const {
    const RemotePayload payload = resolver_(episode_id, phase, spec);
    const nlohmann::json request = {
        {"source_id", spec.id}, {"payload_type", payload.type}, {"payload", payload.payload}};
    const std::string body = request.dump();

    httplib::Client client(config_.host, config_.port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
        ++requests_;
        auto res = client.Post("/v1/embed", body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw IoError("embed request for '" + spec.id + "' rejected with HTTP " +
                          std::to_string(res->status) + ": " + res->body);
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("embed response is not JSON: ") + e.what());
        }
        if (!reply.contains("dim") || !reply.contains("values") || !reply["values"].is_array()) {
            throw FormatError("embed response needs 'dim' and 'values'");
        }
        const auto dim = reply["dim"].get<std::size_t>();
        if (dim != spec.dim || reply["values"].size() != dim) {
            throw FormatError("embed response for '" + spec.id + "' has dim " + std::to_string(dim) +
                              " with " + std::to_string(reply["values"].size()) +
                              " values, registry declares " + std::to_string(spec.dim));
        }
        FeatureBlock block;
        block.source_id = spec.id;
        block.provenance = Provenance::remote;
        block.values.reserve(dim);
        for (const auto& v : reply["values"]) block.values.push_back(v.get<float>());
        return block;
    }
    throw IoError("embed request for episode '" + std::string(episode_id) + "' source '" + spec.id +
                  "' failed after " + std::to_string(config_.retries + 1) + " attempts (" +
                  last_error + ")");
}

}  // namespace lrep::representation
