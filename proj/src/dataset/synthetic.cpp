#include "lrep/dataset/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"

namespace lrep::dataset {

namespace rep = representation;
using nlohmann::json;
using numerics::Rng;

namespace {

constexpr std::array<std::string_view, kColorCount> kColorNames = {"red", "green", "blue", "yellow"};
constexpr std::array<std::string_view, kShapeCount> kShapeNames = {"cube", "ball", "cup", "can"};

constexpr std::string_view kGeometry = "syn_geometry";
constexpr std::string_view kAppearance = "syn_appearance";
constexpr std::string_view kAligned = "syn_aligned";
constexpr std::string_view kRelations = "syn_relations";
constexpr std::string_view kInstAction = "syn_inst_action";
constexpr std::string_view kInstObjects = "syn_inst_objects";

constexpr std::size_t kGeometryPerObject = 4;    // x, y, upright, held
constexpr std::size_t kAppearancePerObject = kColorCount + kShapeCount;

std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

std::string noun(const Object& o) {
    return std::string(kColorNames[static_cast<std::size_t>(o.color)]) + " " +
           std::string(kShapeNames[static_cast<std::size_t>(o.shape)]);
}

}  // namespace

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::pick: return "pick";
        case ActionKind::place_upright: return "place_upright";
        case ActionKind::knock_over: return "knock_over";
        case ActionKind::move_near: return "move_near";
    }
    return "pick";
}

std::string_view to_string(Corruption c) {
    switch (c) {
        case Corruption::none: return "none";
        case Corruption::wrong_object: return "wrong_object";
        case Corruption::wrong_destination: return "wrong_destination";
        case Corruption::noop: return "noop";
    }
    return "none";
}

Corruption corruption_from_string(std::string_view s) {
    for (Corruption c : {Corruption::none, Corruption::wrong_object, Corruption::wrong_destination, Corruption::noop})
        if (to_string(c) == s) return c;
    throw ConfigError("unknown corruption '" + std::string(s) + "'");
}

bool near(const Object& a, const Object& b, int threshold) {
    return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) <= threshold;
}

bool predicate(const WorldState& state, const Action& action, int near_threshold) {
    const Object& t = state.objects.at(action.target);
    switch (action.kind) {
        case ActionKind::pick: return t.held;
        case ActionKind::place_upright: return t.upright;
        case ActionKind::knock_over: return !t.upright;
        case ActionKind::move_near: return near(t, state.objects.at(action.reference), near_threshold);
    }
    return false;
}

std::vector<double> match_indicators(const WorldState& state, const Action& action, int near_threshold) {
    std::vector<double> ind(kActionCount, 0.0);
    ind[static_cast<std::size_t>(action.kind)] = predicate(state, action, near_threshold) ? 1.0 : 0.0;
    return ind;
}

std::string instruction_text(const WorldState& state, const Action& action) {
    const std::string target = noun(state.objects.at(action.target));
    switch (action.kind) {
        case ActionKind::pick: return "pick up the " + target;
        case ActionKind::place_upright: return "place the " + target + " upright";
        case ActionKind::knock_over: return "knock the " + target + " over";
        case ActionKind::move_near:
            return "move the " + target + " near the " + noun(state.objects.at(action.reference));
    }
    return target;
}

std::string describe(const WorldState& state, int near_threshold) {
    std::string text;
    const auto& objs = state.objects;
    for (const Object& o : objs) {
        if (!text.empty()) text += ' ';
        text += "The " + noun(o) + (o.held ? " is held by the robot" : " is on the table");
        text += o.upright ? " and standing." : " and lying down.";
    }
    for (std::size_t i = 0; i < objs.size(); ++i)
        for (std::size_t j = i + 1; j < objs.size(); ++j)
            if (near(objs[i], objs[j], near_threshold)) text += " The " + noun(objs[i]) + " is near the " + noun(objs[j]) + ".";
    return text;
}

std::string frame_name(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%02zu", n);
    return buf;
}

void SyntheticConfig::validate() const {
    if (n_objects_max < 2 || n_objects_max > kColorCount * kShapeCount)
        throw ConfigError("n_objects_max must lie in [2, 16]");
    if (grid < 3) throw ConfigError("grid must be at least 3");
    if (static_cast<std::size_t>(grid * grid) < 4 * n_objects_max)
        throw ConfigError("grid too small for n_objects_max");
    if (near_threshold < 1 || near_threshold >= grid - 1) throw ConfigError("near_threshold must lie in [1, grid-2]");
    if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) throw ConfigError("failure_rate must lie in [0, 1]");
    if (failure_rate > 0.0 && corruptions.empty()) throw ConfigError("corruptions must be non-empty");
    for (Corruption c : corruptions)
        if (c == Corruption::none) throw ConfigError("'none' is not a corruption");
    if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be non-negative");
    if (video_frames == 1) throw ConfigError("video_frames must be 0 or at least 2");
    if (change_frame != 0 && (video_frames == 0 || change_frame >= video_frames))
        throw ConfigError("change_frame must lie in [1, video_frames-1]");
    if (signal_group && *signal_group == rep::Group::instruction)
        throw ConfigError("signal_group must be an image group");
    if (id_prefix.empty()) throw ConfigError("id_prefix must be non-empty");
}

json SyntheticConfig::to_json() const {
    json c = json::array();
    for (Corruption k : corruptions) c.push_back(std::string(dataset::to_string(k)));
    return {{"n_episodes", n_episodes},
            {"n_objects_max", n_objects_max},
            {"failure_rate", failure_rate},
            {"seed", seed},
            {"grid", grid},
            {"near_threshold", near_threshold},
            {"corruptions", c},
            {"signal_group", signal_group ? json(std::string(rep::to_string(*signal_group))) : json(nullptr)},
            {"noise_dims", noise_dims},
            {"noise_scale", noise_scale},
            {"video_frames", video_frames},
            {"change_frame", change_frame},
            {"id_prefix", id_prefix}};
}

SyntheticConfig SyntheticConfig::from_json(const json& j) {
    SyntheticConfig c;
    try {
        c.n_episodes = j.value("n_episodes", c.n_episodes);
        c.n_objects_max = j.value("n_objects_max", c.n_objects_max);
        c.failure_rate = j.value("failure_rate", c.failure_rate);
        c.seed = j.value("seed", c.seed);
        c.grid = j.value("grid", c.grid);
        c.near_threshold = j.value("near_threshold", c.near_threshold);
        if (j.contains("corruptions")) {
            c.corruptions.clear();
            for (const auto& k : j.at("corruptions")) c.corruptions.push_back(corruption_from_string(k.get<std::string>()));
        }
        if (j.contains("signal_group") && !j.at("signal_group").is_null())
            c.signal_group = rep::group_from_string(j.at("signal_group").get<std::string>());
        c.noise_dims = j.value("noise_dims", c.noise_dims);
        c.noise_scale = j.value("noise_scale", c.noise_scale);
        c.video_frames = j.value("video_frames", c.video_frames);
        c.change_frame = j.value("change_frame", c.change_frame);
        c.id_prefix = j.value("id_prefix", c.id_prefix);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid synthetic config: ") + e.what());
    }
    c.validate();
    return c;
}

rep::SourceRegistry synthetic_registry(const SyntheticConfig& config) {
    const std::size_t n = config.n_objects_max;
    const std::size_t extra = 1 + config.noise_dims;  // constant feature plus noise
    return rep::register_sources({
        {std::string(kGeometry), n * kGeometryPerObject + extra, rep::Group::scene},
        {std::string(kAppearance), n * kAppearancePerObject + extra, rep::Group::scene},
        {std::string(kAligned), kActionCount + extra, rep::Group::aligned},
        {std::string(kRelations), std::max<std::size_t>(pair_count(n), kActionCount) + extra, rep::Group::narrative},
        {std::string(kInstAction), kActionCount + extra, rep::Group::instruction},
        {std::string(kInstObjects), 2 * (kColorCount + kShapeCount) + extra, rep::Group::instruction},
    });
}

namespace {

struct Cell {
    int x;
    int y;
};

class Generator {
public:
    Generator(const SyntheticConfig& config, rep::SourceRegistry registry)
        : cfg_(config), registry_(std::move(registry)) {}

    SyntheticWorld sample(Rng& rng) const {
        for (;;) {
            SyntheticWorld w;
            if (!sample_pre(rng, w)) continue;
            const bool fail = rng.uniform() < cfg_.failure_rate;
            w.corruption = fail ? choose_corruption(rng, w) : Corruption::none;
            if (auto post = apply(w.pre, w.action, w.corruption, rng)) {
                w.post = std::move(*post);
                return w;
            }
        }
    }

    std::vector<float> block(std::string_view source, const WorldState& state, const Action& action,
                             Rng& rng) const {
        const std::size_t dim = registry_.at(source).dim;
        std::vector<double> structured = structured_part(source, state, action);
        std::vector<float> out(dim, 0.0F);
        for (std::size_t i = 0; i < structured.size(); ++i) out[i] = static_cast<float>(structured[i]);
        const std::size_t const_at = dim - 1 - cfg_.noise_dims;
        if (is_noise_only(source)) {
            for (std::size_t i = 0; i < const_at; ++i) out[i] = static_cast<float>(cfg_.noise_scale * rng.normal());
        }
        out[const_at] = 1.0F;
        for (std::size_t i = const_at + 1; i < dim; ++i) out[i] = static_cast<float>(cfg_.noise_scale * rng.normal());
        return out;
    }

private:
    const SyntheticConfig& cfg_;
    rep::SourceRegistry registry_;

    bool free_cell(const WorldState& s, Cell c) const {
        return std::none_of(s.objects.begin(), s.objects.end(), [c](const Object& o) { return o.x == c.x && o.y == c.y; });
    }

    int dist(Cell c, const Object& o) const { return std::max(std::abs(c.x - o.x), std::abs(c.y - o.y)); }

    // Free cells within (or, with `within` false, beyond) the near threshold of `anchor`.
    std::vector<Cell> cells_near(const WorldState& s, const Object& anchor, bool within) const {
        std::vector<Cell> out;
        for (int y = 0; y < cfg_.grid; ++y)
            for (int x = 0; x < cfg_.grid; ++x) {
                const Cell c{x, y};
                if (free_cell(s, c) && (dist(c, anchor) <= cfg_.near_threshold) == within) out.push_back(c);
            }
        return out;
    }

    bool sample_pre(Rng& rng, SyntheticWorld& w) const {
        const std::size_t n = 2 + rng.index(cfg_.n_objects_max - 1);
        std::vector<std::size_t> kinds(kColorCount * kShapeCount);
        std::iota(kinds.begin(), kinds.end(), 0);
        rng.shuffle(std::span(kinds));
        std::vector<std::size_t> cells(static_cast<std::size_t>(cfg_.grid * cfg_.grid));
        std::iota(cells.begin(), cells.end(), 0);
        rng.shuffle(std::span(cells));
        WorldState& s = w.pre;
        for (std::size_t i = 0; i < n; ++i) {
            Object o;
            o.color = static_cast<Color>(kinds[i] / kShapeCount);
            o.shape = static_cast<Shape>(kinds[i] % kShapeCount);
            o.x = static_cast<int>(cells[i]) % cfg_.grid;
            o.y = static_cast<int>(cells[i]) / cfg_.grid;
            o.upright = rng.uniform() < 0.7;
            s.objects.push_back(o);
        }
        Action& a = w.action;
        a.kind = static_cast<ActionKind>(rng.index(kActionCount));
        a.target = rng.index(n);
        Object& t = s.objects[a.target];
        switch (a.kind) {
            case ActionKind::pick: break;
            case ActionKind::place_upright: t.upright = false; break;
            case ActionKind::knock_over: t.upright = true; break;
            case ActionKind::move_near: {
                a.reference = (a.target + 1 + rng.index(n - 1)) % n;
                const Object& ref = s.objects[a.reference];
                if (near(t, ref, cfg_.near_threshold)) {
                    const auto far = cells_near(s, ref, false);
                    if (far.empty()) return false;
                    const Cell c = far[rng.index(far.size())];
                    t.x = c.x;
                    t.y = c.y;
                }
                break;
            }
        }
        return !predicate(s, a, cfg_.near_threshold);
    }

    bool applicable(Corruption c, const SyntheticWorld& w) const {
        const std::size_t n = w.pre.objects.size();
        switch (c) {
            case Corruption::wrong_object: return w.action.kind == ActionKind::move_near ? n >= 3 : n >= 2;
            case Corruption::wrong_destination: return w.action.kind == ActionKind::move_near && n >= 3;
            case Corruption::noop: return true;
            case Corruption::none: return false;
        }
        return false;
    }

    // Falls back to noop when no configured corruption applies.
    Corruption choose_corruption(Rng& rng, const SyntheticWorld& w) const {
        std::vector<Corruption> options;
        for (Corruption c : cfg_.corruptions)
            if (applicable(c, w)) options.push_back(c);
        return options.empty() ? Corruption::noop : options[rng.index(options.size())];
    }

    std::size_t other_object(Rng& rng, std::size_t n, std::size_t a, std::size_t b) const {
        std::vector<std::size_t> others;
        for (std::size_t i = 0; i < n; ++i)
            if (i != a && i != b) others.push_back(i);
        return others[rng.index(others.size())];
    }

    static void effect(ActionKind kind, Object& o) {
        switch (kind) {
            case ActionKind::pick: o.held = true; break;
            case ActionKind::place_upright: o.upright = true; break;
            case ActionKind::knock_over: o.upright = false; break;
            case ActionKind::move_near: break;
        }
    }

    bool move_to(WorldState& s, std::size_t mover, const std::vector<Cell>& cells, Rng& rng) const {
        if (cells.empty()) return false;
        const Cell c = cells[rng.index(cells.size())];
        s.objects[mover].x = c.x;
        s.objects[mover].y = c.y;
        return true;
    }

    std::optional<WorldState> apply(const WorldState& pre, const Action& a, Corruption c, Rng& rng) const {
        WorldState s = pre;
        const std::size_t n = s.objects.size();
        const bool move = a.kind == ActionKind::move_near;
        switch (c) {
            case Corruption::noop: return s;
            case Corruption::none:
                if (!move) {
                    effect(a.kind, s.objects[a.target]);
                    return s;
                }
                if (!move_to(s, a.target, cells_near(s, s.objects[a.reference], true), rng)) return std::nullopt;
                return s;
            case Corruption::wrong_object: {
                const std::size_t other = other_object(rng, n, a.target, move ? a.reference : a.target);
                if (!move) {
                    effect(a.kind, s.objects[other]);
                    return s;
                }
                if (!move_to(s, other, cells_near(s, s.objects[a.reference], true), rng)) return std::nullopt;
                return s;
            }
            case Corruption::wrong_destination: {
                const std::size_t other = other_object(rng, n, a.target, a.reference);
                std::vector<Cell> cells = cells_near(s, s.objects[other], true);
                const Object& ref = s.objects[a.reference];
                std::erase_if(cells, [&](Cell cell) { return dist(cell, ref) <= cfg_.near_threshold; });
                if (!move_to(s, a.target, cells, rng)) return std::nullopt;
                return s;
            }
        }
        return std::nullopt;
    }

    bool is_noise_only(std::string_view source) const {
        if (!cfg_.signal_group) return false;
        const rep::Group g = registry_.at(source).group;
        if (g == rep::Group::instruction) return false;
        if (g != *cfg_.signal_group) return true;
        return source != registry_.sources_in(g).front().id;
    }

    std::vector<double> structured_part(std::string_view source, const WorldState& s, const Action& a) const {
        if (is_noise_only(source)) return {};
        const rep::Group g = registry_.at(source).group;
        if (cfg_.signal_group && g == *cfg_.signal_group) return match_indicators(s, a, cfg_.near_threshold);

        std::vector<double> v;
        const double scale = 1.0 / static_cast<double>(cfg_.grid - 1);
        if (source == kGeometry) {
            v.assign(cfg_.n_objects_max * kGeometryPerObject, 0.0);
            for (std::size_t i = 0; i < s.objects.size(); ++i) {
                const Object& o = s.objects[i];
                double* p = &v[i * kGeometryPerObject];
                p[0] = o.x * scale;
                p[1] = o.y * scale;
                p[2] = o.upright ? 1.0 : 0.0;
                p[3] = o.held ? 1.0 : 0.0;
            }
        } else if (source == kAppearance) {
            v.assign(cfg_.n_objects_max * kAppearancePerObject, 0.0);
            for (std::size_t i = 0; i < s.objects.size(); ++i) {
                v[i * kAppearancePerObject + static_cast<std::size_t>(s.objects[i].color)] = 1.0;
                v[i * kAppearancePerObject + kColorCount + static_cast<std::size_t>(s.objects[i].shape)] = 1.0;
            }
        } else if (source == kAligned) {
            v = match_indicators(s, a, cfg_.near_threshold);
        } else if (source == kRelations) {
            v.assign(pair_count(cfg_.n_objects_max), 0.0);
            std::size_t k = 0;
            for (std::size_t i = 0; i < cfg_.n_objects_max; ++i)
                for (std::size_t j = i + 1; j < cfg_.n_objects_max; ++j, ++k)
                    if (j < s.objects.size() && near(s.objects[i], s.objects[j], cfg_.near_threshold)) v[k] = 1.0;
        } else if (source == kInstAction) {
            v.assign(kActionCount, 0.0);
            v[static_cast<std::size_t>(a.kind)] = 1.0;
        } else if (source == kInstObjects) {
            v.assign(2 * (kColorCount + kShapeCount), 0.0);
            const auto mark = [&](const Object& o, std::size_t base) {
                v[base + static_cast<std::size_t>(o.color)] = 1.0;
                v[base + kColorCount + static_cast<std::size_t>(o.shape)] = 1.0;
            };
            mark(s.objects.at(a.target), 0);
            if (a.kind == ActionKind::move_near) mark(s.objects.at(a.reference), kColorCount + kShapeCount);
        }
        return v;
    }
};

std::string episode_id(const SyntheticConfig& cfg, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%06zu", k);
    return cfg.id_prefix + buf;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    SyntheticData data;
    data.registry = synthetic_registry(config);
    const Generator gen(config, data.registry);

    for (std::size_t k = 0; k < config.n_episodes; ++k) {
        Episode e;
        e.episode_id = episode_id(config, k);
        Rng rng(numerics::derive_seed(config.seed, e.episode_id));
        SyntheticWorld w = gen.sample(rng);
        e.instruction = instruction_text(w.pre, w.action);
        e.label = predicate(w.post, w.action, config.near_threshold) ? 1 : 0;

        const auto put_image = [&](const std::string& phase, const WorldState& state) {
            for (const rep::SourceSpec& s : data.registry.sources()) {
                if (s.group == rep::Group::instruction) continue;
                data.store.put(e.episode_id, phase,
                               {s.id, gen.block(s.id, state, w.action, rng), rep::Provenance::synthetic});
            }
            data.store.put_caption(e.episode_id, phase, describe(state, config.near_threshold));
        };

        if (config.video_frames == 0) {
            put_image(e.before_ref, w.pre);
            put_image(e.after_ref, w.post);
        } else {
            w.change_frame = config.change_frame != 0 ? config.change_frame : 1 + rng.index(config.video_frames - 1);
            for (std::size_t f = 0; f < config.video_frames; ++f) {
                e.frames.push_back(frame_name(f));
                put_image(e.frames.back(), f < w.change_frame ? w.pre : w.post);
            }
            e.before_ref = e.frames.front();
            e.after_ref = e.frames.back();
        }
        for (const rep::SourceSpec& s : data.registry.sources_in(rep::Group::instruction))
            data.store.put(e.episode_id, std::string(rep::phase::instruction),
                           {s.id, gen.block(s.id, w.pre, w.action, rng), rep::Provenance::synthetic});

        data.episodes.push_back(std::move(e));
        data.worlds.push_back(std::move(w));
    }
    return data;
}

}  // namespace lrep::dataset
