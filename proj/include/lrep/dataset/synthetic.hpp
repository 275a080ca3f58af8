#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrep/dataset/episode.hpp"
#include "lrep/representation/provider.hpp"
#include "lrep/representation/source_registry.hpp"

namespace lrep::dataset {

enum class Color { red, green, blue, yellow };
enum class Shape { cube, ball, cup, can };
inline constexpr std::size_t kColorCount = 4;
inline constexpr std::size_t kShapeCount = 4;

struct Object {
    Color color = Color::red;
    Shape shape = Shape::cube;
    int x = 0;
    int y = 0;
    bool upright = true;
    bool held = false;

    friend bool operator==(const Object&, const Object&) = default;
};

struct WorldState {
    std::vector<Object> objects;

    friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class ActionKind { pick, place_upright, knock_over, move_near };
inline constexpr std::size_t kActionCount = 4;

/// `reference` is the object to end up near; used by move_near only.
struct Action {
    ActionKind kind = ActionKind::pick;
    std::size_t target = 0;
    std::size_t reference = 0;

    friend bool operator==(const Action&, const Action&) = default;
};

enum class Corruption { none, wrong_object, wrong_destination, noop };

std::string_view to_string(ActionKind k);
std::string_view to_string(Corruption c);
Corruption corruption_from_string(std::string_view s);

/// Chebyshev distance at most `threshold`.
bool near(const Object& a, const Object& b, int threshold);

/// Postcondition of the instruction on `state`.
bool predicate(const WorldState& state, const Action& action, int near_threshold);

/// [pick & held, place & upright, knock & !upright, move & near]; at most one
/// entry is 1 and its value equals predicate().
std::vector<double> match_indicators(const WorldState& state, const Action& action, int near_threshold);

std::string instruction_text(const WorldState& state, const Action& action);
/// Caption synthesized from the state; stands in for an external captioner.
std::string describe(const WorldState& state, int near_threshold);

struct SyntheticWorld {
    WorldState pre;
    Action action;
    Corruption corruption = Corruption::none;
    WorldState post;
    std::size_t change_frame = 0;  // video only

    bool executed_correctly() const { return corruption == Corruption::none; }
};

struct SyntheticConfig {
    std::size_t n_episodes = 2000;
    std::size_t n_objects_max = 4;
    double failure_rate = 0.5;
    std::uint64_t seed = 0;
    int grid = 8;
    int near_threshold = 1;
    std::vector<Corruption> corruptions = {Corruption::wrong_object, Corruption::wrong_destination,
                                           Corruption::noop};
    /// When set, only this group carries the match indicators and the other
    /// image groups hold label-independent noise.
    std::optional<representation::Group> signal_group;
    std::size_t noise_dims = 4;
    double noise_scale = 0.1;
    /// 0 for before/after pairs, otherwise frames per video episode.
    std::size_t video_frames = 0;
    /// Frame at which the post state appears; 0 draws it uniformly from 1..frames-1.
    std::size_t change_frame = 0;
    std::string id_prefix = "syn";

    void validate() const;
    nlohmann::json to_json() const;
    static SyntheticConfig from_json(const nlohmann::json& j);
};

/// Image sources: two scene, one aligned, one narrative. Two instruction sources.
representation::SourceRegistry synthetic_registry(const SyntheticConfig& config);

struct SyntheticData {
    std::vector<Episode> episodes;
    std::vector<SyntheticWorld> worlds;  // aligned with episodes
    representation::FeatureStore store;
    representation::SourceRegistry registry;
};

/// Deterministic in the config. Each episode draws from its own stream, so
/// episode k is the same regardless of n_episodes.
SyntheticData generate_synthetic(const SyntheticConfig& config);

std::string frame_name(std::size_t n);

}  // namespace lrep::dataset
