#include "lrep/representation/provider.hpp"

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/lrep_io.hpp"

namespace lrep::representation {

namespace {

constexpr char kSep = '\x1f';

std::string store_key(std::string_view a, std::string_view b) {
    std::string k;
    k.append(a).push_back(kSep);
    k.append(b);
    return k;
}

std::string store_key(std::string_view a, std::string_view b, std::string_view c) {
    std::string k = store_key(a, b);
    k.push_back(kSep);
    k.append(c);
    return k;
}

std::vector<std::string> split_key(const std::string& key) {
    std::vector<std::string> parts(1);
    for (char ch : key) {
        if (ch == kSep) {
            parts.emplace_back();
        } else {
            parts.back().push_back(ch);
        }
    }
    return parts;
}

}  // namespace

FeatureBlock FileProvider::get(std::string_view episode_id, std::string_view phase,
                               std::string_view source_id) const {
    const auto path = block_path(root_, episode_id, phase, source_id);
    if (!std::filesystem::exists(path)) {
        throw MissingFeatureError(std::string(episode_id), std::string(phase), std::string(source_id));
    }
    FeatureBlock block = read_block(path, Provenance::file);
    if (block.source_id != source_id) {
        throw FormatError(path.string() + ": file carries source '" + block.source_id +
                          "', expected '" + std::string(source_id) + "'");
    }
    return block;
}

std::optional<std::string> FileProvider::caption(std::string_view episode_id,
                                                 std::string_view phase) const {
    const auto path = caption_path(root_, episode_id, phase);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file(path);
}

void FeatureStore::put(std::string episode_id, std::string phase, FeatureBlock block) {
    auto key = store_key(episode_id, phase, block.source_id);
    blocks_.insert_or_assign(std::move(key), std::move(block));
}

void FeatureStore::put_caption(std::string episode_id, std::string phase, std::string text) {
    captions_.insert_or_assign(store_key(episode_id, phase), std::move(text));
}

FeatureBlock FeatureStore::get(std::string_view episode_id, std::string_view phase,
                               std::string_view source_id) const {
    auto it = blocks_.find(store_key(episode_id, phase, source_id));
    if (it == blocks_.end()) {
        throw MissingFeatureError(std::string(episode_id), std::string(phase), std::string(source_id));
    }
    return it->second;
}

std::optional<std::string> FeatureStore::caption(std::string_view episode_id,
                                                 std::string_view phase) const {
    auto it = captions_.find(store_key(episode_id, phase));
    if (it == captions_.end()) return std::nullopt;
    return it->second;
}

void FeatureStore::write_to(const std::filesystem::path& root) const {
    for (const auto& [key, block] : blocks_) {
        const auto parts = split_key(key);
        write_block(block_path(root, parts[0], parts[1], parts[2]), block);
    }
    for (const auto& [key, text] : captions_) {
        const auto parts = split_key(key);
        write_file(caption_path(root, parts[0], parts[1]), text);
    }
}

FeatureBlock RandomProvider::get(std::string_view episode_id, std::string_view phase,
                                 std::string_view source_id) const {
    const SourceSpec* spec = registry_.find(source_id);
    if (!spec) {
        throw MissingFeatureError(std::string(episode_id), std::string(phase), std::string(source_id));
    }
    std::string tag;
    tag.append(episode_id).append("\x1f").append(phase).append("\x1f").append(source_id);
    numerics::Rng rng(numerics::derive_seed(seed_, tag));
    FeatureBlock block;
    block.source_id = spec->id;
    block.provenance = Provenance::synthetic;
    block.values.resize(spec->dim);
    for (float& v : block.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return block;
}

std::optional<std::string> RandomProvider::caption(std::string_view episode_id,
                                                   std::string_view phase) const {
    return "In the image, synthetic scene " + std::string(episode_id) + "/" + std::string(phase) + ".";
}

FeatureBlock ExclusiveProvider::get(std::string_view episode_id, std::string_view phase,
                                    std::string_view source_id) const {
    std::lock_guard lock(mutex_);
    return inner_.get(episode_id, phase, source_id);
}

std::optional<std::string> ExclusiveProvider::caption(std::string_view episode_id,
                                                      std::string_view phase) const {
    std::lock_guard lock(mutex_);
    return inner_.caption(episode_id, phase);
}

}  // namespace lrep::representation
