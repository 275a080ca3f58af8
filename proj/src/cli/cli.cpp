#include "lrep/cli/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lrep/dataset/episode.hpp"
#include "lrep/dataset/sprt1_fixture.hpp"
#include "lrep/dataset/synthetic.hpp"
#include "lrep/decoder/checkpoint.hpp"
#include "lrep/decoder/decoder.hpp"
#include "lrep/errors.hpp"
#include "lrep/harness/harness.hpp"
#include "lrep/numerics/grad_check.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/lrep_io.hpp"

namespace lrep::cli {

namespace fs = std::filesystem;
namespace rep = representation;
using nlohmann::json;

namespace {

constexpr double kGradTolerance = 1e-4;

// Options every command takes.
struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "lrep_out";
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config; explicit flags win")->check(CLI::ExistingFile);
        seed_opt = app->add_option("--seed", seed, "random seed");
        app->add_option("--out", out_dir, "output directory")->capture_default_str();
    }

    json config() const {
        if (config_path.empty()) return json::object();
        try {
            json j = json::parse(rep::read_file(config_path));
            if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
            return j;
        } catch (const json::parse_error& e) {
            throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
        }
    }

    /// Explicit --seed, else the config's "seed", else 0.
    std::uint64_t resolved_seed(const json& cfg) const {
        if (seed_opt->count() > 0) return seed;
        return cfg.value("seed", std::uint64_t{0});
    }

    fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }
};

// Value from an explicit flag, else the config key, else the default.
template <typename T>
T pick(const CLI::Option* opt, const T& flag_value, const json& cfg, const char* key) {
    if (opt->count() > 0) return flag_value;
    if (cfg.contains(key)) {
        try {
            return cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config key '") + key + "' has the wrong type");
        }
    }
    return flag_value;
}

json section(const json& cfg, const char* key) {
    if (!cfg.contains(key)) return json::object();
    if (!cfg.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
    return cfg.at(key);
}

void write_json(const fs::path& path, const json& j) { rep::write_file(path, j.dump(2) + "\n"); }

json stamp(json result, const std::string& command, const json& effective) {
    result["command"] = command;
    result["config_digest"] = decoder::digest_hex(numerics::fnv1a64(effective.dump()));
    return result;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(part, &used);
            if (used != part.size() || v < 0) throw std::invalid_argument(part);
            sizes.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("--sizes expects three non-negative integers, got '" + text + "'");
        }
    }
    if (sizes.size() != 3) throw ConfigError("--sizes expects three comma-separated integers");
    return sizes;
}

std::set<rep::Group> parse_groups(const std::string& text) {
    std::set<rep::Group> groups;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');)
        if (!part.empty()) groups.insert(rep::group_from_string(part));
    return groups;
}

rep::SourceRegistry load_registry(const std::string& registry_path, const std::string& features) {
    fs::path path = registry_path;
    if (path.empty() && !features.empty() && fs::exists(fs::path(features) / "registry.json"))
        path = fs::path(features) / "registry.json";
    if (path.empty()) return rep::default_registry();
    try {
        return rep::registry_from_json(json::parse(rep::read_file(path)));
    } catch (const json::parse_error& e) {
        throw ConfigError("registry file is not valid JSON: " + std::string(e.what()));
    }
}

struct DataArgs {
    std::string manifest;
    std::string features;
    std::string registry;

    void attach(CLI::App* app, bool need_features = true) {
        app->add_option("--manifest", manifest, "episode manifest (JSON Lines)")->required()->check(CLI::ExistingFile);
        auto* f = app->add_option("--features", features, "feature store root (LREP files)");
        if (need_features) f->required()->check(CLI::ExistingDirectory);
        app->add_option("--registry", registry, "source registry JSON (default: <features>/registry.json)");
    }
};

struct TrainArgs {
    std::string profile = "desk";
    std::size_t epochs = 0;
    double lr = 0;
    std::size_t batch_size = 0;
    std::string mode;
    std::string groups;
    std::string split_path;
    std::string sizes;
    std::size_t jobs = 1;
    CLI::Option *profile_opt, *epochs_opt, *lr_opt, *batch_opt, *mode_opt, *groups_opt;

    void attach(CLI::App* app) {
        profile_opt = app->add_option("--profile", profile, "paper or desk")->capture_default_str();
        epochs_opt = app->add_option("--epochs", epochs, "epochs");
        lr_opt = app->add_option("--lr", lr, "learning rate");
        batch_opt = app->add_option("--batch-size", batch_size, "mini-batch size");
        mode_opt = app->add_option("--mode", mode, "cross or self");
        groups_opt = app->add_option("--groups", groups, "enabled groups, e.g. SR,AR,NR");
        app->add_option("--split", split_path, "split JSON from the split command")->check(CLI::ExistingFile);
        app->add_option("--sizes", sizes, "train,val,test sizes when no --split is given");
        app->add_option("--jobs", jobs, "concurrent runs")->capture_default_str();
    }

    harness::TrainConfig resolve(const json& cfg, std::uint64_t seed) const {
        json j = section(cfg, "train");
        if (profile_opt->count() > 0 || !j.contains("profile")) j["profile"] = profile;
        if (epochs_opt->count() > 0) j["epochs"] = epochs;
        if (lr_opt->count() > 0) j["lr"] = lr;
        if (batch_opt->count() > 0) j["batch_size"] = batch_size;
        if (mode_opt->count() > 0) j["mode"] = mode;
        if (groups_opt->count() > 0) {
            json g = json::array();
            for (rep::Group x : parse_groups(groups)) g.push_back(std::string(rep::ablation_tag(x)));
            j["enabled_groups"] = g;
        }
        j["seed"] = seed;
        return harness::TrainConfig::from_json(j);
    }

    dataset::DatasetSplit split(const std::vector<dataset::Episode>& episodes, std::uint64_t seed) const {
        if (!split_path.empty()) return dataset::split_from_json(json::parse(rep::read_file(split_path)));
        if (sizes.empty()) throw ConfigError("train needs --split or --sizes");
        const auto s = parse_sizes(sizes);
        return dataset::split_dataset(episodes, {s[0], s[1], s[2]}, seed);
    }
};

struct Cli {
    CLI::App app{"Success prediction from before/after feature blocks"};
    std::ostream& out;

    // stats / cleanse / split
    Common stats_c, cleanse_c, split_c;
    std::string stats_manifest;
    bool stats_fixture = false;
    std::string cleanse_manifest;
    std::string split_manifest, split_sizes;
    bool split_stratify = false;

    // synth
    Common synth_c;
    std::size_t synth_episodes = 0;
    double synth_failure = 0;
    std::string synth_signal;
    std::size_t synth_video = 0, synth_change = 0, synth_objects = 0;
    bool synth_sprt1 = false;
    CLI::Option *synth_episodes_opt, *synth_failure_opt, *synth_signal_opt, *synth_video_opt, *synth_change_opt,
        *synth_objects_opt;

    // train / ablate
    Common train_c, ablate_c;
    DataArgs train_d, ablate_d;
    TrainArgs train_t, ablate_t;
    std::string ablate_conditions = "all";

    // eval / video
    Common eval_c, video_c;
    DataArgs eval_d, video_d;
    std::string eval_ck, eval_split, eval_part = "test", video_ck, video_episode;
    double eval_threshold = 0.5, video_threshold = 0.5;
    bool eval_skip = false;

    // gradcheck / params
    Common grad_c, params_c;
    std::size_t grad_dims = 4;
    std::string grad_mode = "cross";
    double grad_h = 1e-6;
    std::string params_profile = "paper", params_registry;

    explicit Cli(std::ostream& o) : out(o) {
        app.require_subcommand(1);
        app.set_help_all_flag("--help-all", "help for every command");

        auto* s = app.add_subcommand("stats", "counts, vocabulary and instruction lengths of a manifest");
        stats_c.attach(s);
        s->add_option("--manifest", stats_manifest, "manifest path")->check(CLI::ExistingFile);
        s->add_flag("--sprt1-fixture", stats_fixture, "use the built-in SP-RT-1-shaped fixture");
        s->callback([this] { cmd_stats(); });

        auto* c = app.add_subcommand("cleanse", "replace instructions of flagged negatives");
        cleanse_c.attach(c);
        c->add_option("--manifest", cleanse_manifest, "manifest path")->required()->check(CLI::ExistingFile);
        c->callback([this] { cmd_cleanse(); });

        auto* sp = app.add_subcommand("split", "seeded train/val/test split");
        split_c.attach(sp);
        sp->add_option("--manifest", split_manifest, "manifest path")->required()->check(CLI::ExistingFile);
        sp->add_option("--sizes", split_sizes, "train,val,test")->required();
        sp->add_flag("--stratify", split_stratify, "keep the label ratio in every part");
        sp->callback([this] { cmd_split(); });

        auto* sy = app.add_subcommand("synth", "generate a synthetic manifest and feature store");
        synth_c.attach(sy);
        synth_episodes_opt = sy->add_option("--episodes", synth_episodes, "episode count");
        synth_failure_opt = sy->add_option("--failure-rate", synth_failure, "probability of a corrupted action");
        synth_signal_opt = sy->add_option("--signal-group", synth_signal, "route the label signal through SR, AR or NR");
        synth_objects_opt = sy->add_option("--objects", synth_objects, "maximum objects per world");
        synth_video_opt = sy->add_option("--video-frames", synth_video, "frames per video episode (0: pairs)");
        synth_change_opt = sy->add_option("--change-frame", synth_change, "frame where the post state appears");
        sy->add_flag("--sprt1-fixture", synth_sprt1, "write the SP-RT-1-shaped manifest instead");
        sy->callback([this] { cmd_synth(); });

        auto* tr = app.add_subcommand("train", "train, select on validation, evaluate on test");
        train_c.attach(tr);
        train_d.attach(tr);
        train_t.attach(tr);
        tr->callback([this] { cmd_train(); });

        auto* ev = app.add_subcommand("eval", "confusion matrix of a checkpoint");
        eval_c.attach(ev);
        eval_d.attach(ev);
        ev->add_option("--checkpoint", eval_ck, "checkpoint path")->required()->check(CLI::ExistingFile);
        ev->add_option("--split", eval_split, "split JSON; evaluates one part")->check(CLI::ExistingFile);
        ev->add_option("--part", eval_part, "train, val or test")->capture_default_str();
        ev->add_option("--threshold", eval_threshold, "decision threshold")->capture_default_str();
        ev->add_flag("--skip-missing", eval_skip, "exclude episodes whose features are missing");
        ev->callback([this] { cmd_eval(); });

        auto* ab = app.add_subcommand("ablate", "representation and attention ablations");
        ablate_c.attach(ab);
        ablate_d.attach(ab);
        ablate_t.attach(ab);
        ab->add_option("--conditions", ablate_conditions, "representation, modes or all")->capture_default_str();
        ab->callback([this] { cmd_ablate(); });

        auto* vi = app.add_subcommand("video", "classify video episodes from (0, n) frame pairs");
        video_c.attach(vi);
        video_d.attach(vi);
        vi->add_option("--checkpoint", video_ck, "checkpoint path")->required()->check(CLI::ExistingFile);
        vi->add_option("--episode", video_episode, "single episode id (default: every video episode)");
        vi->add_option("--threshold", video_threshold, "decision threshold")->capture_default_str();
        vi->callback([this] { cmd_video(); });

        auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full decoder gradient");
        grad_c.attach(gc);
        gc->add_option("--dims", grad_dims, "model width of the toy instance")->capture_default_str()->check(
            CLI::Range(1, 64));
        gc->add_option("--mode", grad_mode, "cross or self")->capture_default_str();
        gc->add_option("--step", grad_h, "central difference step")->capture_default_str();
        gc->callback([this] { cmd_gradcheck(); });

        auto* pc = app.add_subcommand("params", "trainable parameter counts");
        params_c.attach(pc);
        pc->add_option("--profile", params_profile, "paper or desk")->capture_default_str();
        pc->add_option("--registry", params_registry, "source registry JSON")->check(CLI::ExistingFile);
        pc->callback([this] { cmd_params(); });
    }

    void emit(const Common& c, const std::string& file, const json& result) {
        fs::create_directories(c.out_dir);
        write_json(c.out(file), result);
        out << result.dump(2) << "\n";
    }

    void cmd_stats() {
        const json cfg = stats_c.config();
        if (stats_manifest.empty() && !stats_fixture) throw ConfigError("stats needs --manifest or --sprt1-fixture");
        const auto eps = stats_fixture ? dataset::make_sprt1_fixture(stats_c.resolved_seed(cfg))
                                       : dataset::load_manifest(stats_manifest);
        const json eff = {{"manifest", stats_manifest}, {"fixture", stats_fixture}};
        emit(stats_c, "stats.json", stamp(dataset::dataset_stats(eps).to_json(), "stats", eff));
    }

    void cmd_cleanse() {
        const json cfg = cleanse_c.config();
        const std::uint64_t seed = cleanse_c.resolved_seed(cfg);
        const auto eps = dataset::load_manifest(cleanse_manifest);
        const auto cleaned = dataset::cleanse_negatives(eps, dataset::instruction_pool(eps), seed);
        std::size_t replaced = 0;
        for (std::size_t i = 0; i < eps.size(); ++i) replaced += eps[i].instruction != cleaned[i].instruction;
        fs::create_directories(cleanse_c.out_dir);
        dataset::write_manifest(cleanse_c.out("manifest.jsonl"), cleaned);
        const json eff = {{"manifest", cleanse_manifest}, {"seed", seed}};
        emit(cleanse_c, "cleanse.json",
             stamp({{"episodes", eps.size()}, {"replaced", replaced}, {"seed", seed}}, "cleanse", eff));
    }

    void cmd_split() {
        const json cfg = split_c.config();
        const std::uint64_t seed = split_c.resolved_seed(cfg);
        const auto s = parse_sizes(split_sizes);
        const auto eps = dataset::load_manifest(split_manifest);
        const auto split = dataset::split_dataset(eps, {s[0], s[1], s[2]}, seed, split_stratify);
        const json eff = {{"manifest", split_manifest}, {"sizes", s}, {"seed", seed}, {"stratify", split_stratify}};
        fs::create_directories(split_c.out_dir);
        write_json(split_c.out("split.json"), stamp(dataset::to_json(split), "split", eff));
        for (const auto& [name, ids] : {std::pair{"train", &split.train}, {"val", &split.val}, {"test", &split.test}}) {
            std::string text;
            for (const auto& id : *ids) text += id + "\n";
            rep::write_file(split_c.out(std::string(name) + ".txt"), text);
        }
        json summary = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}, {"seed", seed}};
        out << stamp(summary, "split", eff).dump(2) << "\n";
    }

    void cmd_synth() {
        const json cfg = synth_c.config();
        const std::uint64_t seed = synth_c.resolved_seed(cfg);
        fs::create_directories(synth_c.out_dir);
        if (synth_sprt1) {
            const auto eps = dataset::make_sprt1_fixture(seed);
            dataset::write_manifest(synth_c.out("manifest.jsonl"), eps);
            emit(synth_c, "synth.json",
                 stamp({{"episodes", eps.size()}, {"fixture", "sprt1"}}, "synth", {{"fixture", "sprt1"}, {"seed", seed}}));
            return;
        }
        json j = section(cfg, "synthetic");
        j["seed"] = seed;
        if (synth_episodes_opt->count()) j["n_episodes"] = synth_episodes;
        if (synth_failure_opt->count()) j["failure_rate"] = synth_failure;
        if (synth_signal_opt->count()) j["signal_group"] = synth_signal;
        if (synth_objects_opt->count()) j["n_objects_max"] = synth_objects;
        if (synth_video_opt->count()) j["video_frames"] = synth_video;
        if (synth_change_opt->count()) j["change_frame"] = synth_change;
        const auto sc = dataset::SyntheticConfig::from_json(j);
        const auto data = dataset::generate_synthetic(sc);
        dataset::write_manifest(synth_c.out("manifest.jsonl"), data.episodes);
        data.store.write_to(synth_c.out("features"));
        write_json(synth_c.out("features") / "registry.json", data.registry.to_json());
        std::size_t positives = 0;
        for (const auto& e : data.episodes) positives += e.label;
        emit(synth_c, "synth.json",
             stamp({{"episodes", data.episodes.size()}, {"positives", positives}, {"blocks", data.store.block_count()},
                    {"synthetic", sc.to_json()}},
                   "synth", sc.to_json()));
    }

    struct Loaded {
        std::vector<dataset::Episode> episodes;
        rep::SourceRegistry registry;
        std::unique_ptr<rep::FileProvider> provider;
    };

    static Loaded load(const DataArgs& d) {
        Loaded l{dataset::load_manifest(d.manifest), load_registry(d.registry, d.features), nullptr};
        l.provider = std::make_unique<rep::FileProvider>(d.features);
        return l;
    }

    void cmd_train() {
        const json cfg = train_c.config();
        const std::uint64_t seed = train_c.resolved_seed(cfg);
        const auto tc = train_t.resolve(cfg, seed);
        Loaded l = load(train_d);
        const harness::Experiment ex{l.episodes, train_t.split(l.episodes, seed), l.provider.get(), l.registry};
        fs::create_directories(train_c.out_dir);
        const auto run = harness::run_experiment(ex, tc, train_c.out("model.lrck"));
        rep::write_file(train_c.out("run.csv"), run.result.to_csv());
        json result = run.result.to_json();
        result["train_config"] = tc.to_json();
        result["checkpoint"] = train_c.out("model.lrck").string();
        emit(train_c, "run.json", stamp(result, "train", tc.to_json()));
    }

    void cmd_ablate() {
        const json cfg = ablate_c.config();
        const std::uint64_t seed = ablate_c.resolved_seed(cfg);
        const auto tc = ablate_t.resolve(cfg, seed);
        std::vector<harness::AblationCondition> conditions;
        if (ablate_conditions == "representation") conditions = harness::representation_conditions();
        else if (ablate_conditions == "modes") conditions = harness::mode_conditions();
        else if (ablate_conditions == "all") conditions = harness::default_conditions();
        else throw ConfigError("--conditions must be representation, modes or all");
        Loaded l = load(ablate_d);
        const harness::Experiment ex{l.episodes, ablate_t.split(l.episodes, seed), l.provider.get(), l.registry};
        const auto table = harness::run_ablation(ex, tc, conditions, ablate_t.jobs);
        fs::create_directories(ablate_c.out_dir);
        rep::write_file(ablate_c.out("ablation.csv"), table.to_csv());
        json eff = tc.to_json();
        eff["conditions"] = ablate_conditions;
        emit(ablate_c, "ablation.json", stamp(table.to_json(), "ablate", eff));
    }

    void cmd_eval() {
        const json cfg = eval_c.config();
        const auto ck = decoder::load_checkpoint(eval_ck);
        auto eps = dataset::load_manifest(eval_d.manifest);
        if (!eval_split.empty()) {
            const auto split = dataset::split_from_json(json::parse(rep::read_file(eval_split)));
            const std::vector<std::string>* ids = eval_part == "train" ? &split.train
                                                  : eval_part == "val" ? &split.val
                                                  : eval_part == "test" ? &split.test
                                                                        : nullptr;
            if (ids == nullptr) throw ConfigError("--part must be train, val or test");
            eps = dataset::select(eps, *ids);
        }
        const rep::FileProvider provider(eval_d.features);
        const auto report = harness::evaluate(ck, eps, provider, eval_threshold, eval_skip);
        json excluded = json::array();
        for (const auto& f : report.excluded)
            excluded.push_back({{"episode_id", f.episode_id}, {"kind", f.kind}, {"message", f.message}});
        const json eff = {{"checkpoint_digest", decoder::digest_hex(ck.digest)}, {"threshold", eval_threshold},
                          {"part", eval_split.empty() ? "all" : eval_part}, {"skip_missing", eval_skip}};
        emit(eval_c, "eval.json",
             stamp({{"confusion", report.matrix.to_json()}, {"excluded", excluded},
                    {"checkpoint_digest", decoder::digest_hex(ck.digest)}},
                   "eval", eff));
    }

    void cmd_video() {
        const json cfg = video_c.config();
        const auto ck = decoder::load_checkpoint(video_ck);
        const auto eps = dataset::load_manifest(video_d.manifest);
        const rep::FileProvider provider(video_d.features);
        json videos = json::array();
        for (const auto& e : eps) {
            if (!video_episode.empty() ? e.episode_id != video_episode : e.frames.empty()) continue;
            json v = harness::classify_video(ck, e, provider, video_threshold).to_json();
            v["episode_id"] = e.episode_id;
            v["label"] = e.label;
            videos.push_back(v);
        }
        if (!video_episode.empty() && videos.empty())
            throw ConfigError("episode '" + video_episode + "' not found in the manifest");
        const json eff = {{"checkpoint_digest", decoder::digest_hex(ck.digest)}, {"threshold", video_threshold}};
        emit(video_c, "video.json", stamp({{"videos", videos}}, "video", eff));
    }

    void cmd_gradcheck() {
        const json cfg = grad_c.config();
        const std::uint64_t seed = grad_c.resolved_seed(cfg);
        const auto mode = decoder::attention_mode_from_string(grad_mode);
        numerics::Rng rng(numerics::derive_seed(seed, "gradcheck"));
        const auto dim = [&] { return 2 + rng.index(5); };
        const auto registry = rep::register_sources({{"s0", dim(), rep::Group::scene},
                                                     {"s1", dim(), rep::Group::scene},
                                                     {"a0", dim(), rep::Group::aligned},
                                                     {"n0", dim(), rep::Group::narrative},
                                                     {"l0", dim(), rep::Group::instruction},
                                                     {"l1", dim(), rep::Group::instruction}});
        decoder::DecoderConfig dc;
        dc.d_model = dc.d_k = dc.d_v = grad_dims;
        dc.mlp_hidden = {grad_dims};
        const auto params = decoder::init_params(dc, registry, seed);
        const rep::RandomProvider provider(registry, seed);
        const auto features = rep::gather_episode(provider, registry, "gradcheck");
        const int label = static_cast<int>(rng.index(2));

        const auto lg = decoder::loss_and_grad(features, label, params, mode);
        std::vector<double> analytic;
        for (const auto& g : lg.grads) analytic.insert(analytic.end(), g.data().begin(), g.data().end());
        decoder::DecoderParams scratch = params;
        const auto f = [&](std::span<const double> x) {
            scratch.store.assign_flat(x);
            return decoder::loss_only(features, label, scratch, mode);
        };
        const auto r = numerics::grad_check(f, params.store.flatten(), analytic, grad_h);
        const json eff = {{"dims", grad_dims}, {"mode", grad_mode}, {"h", grad_h}, {"seed", seed}};
        emit(grad_c, "gradcheck.json",
             stamp({{"max_relative_error", r.max_relative_error},
                    {"worst_parameter", r.worst_index},
                    {"parameters", analytic.size()},
                    {"tolerance", kGradTolerance},
                    {"pass", r.max_relative_error < kGradTolerance}},
                   "gradcheck", eff));
        if (!(r.max_relative_error < kGradTolerance))
            throw NumericError("gradient check failed: max relative error " + std::to_string(r.max_relative_error));
    }

    void cmd_params() {
        const json cfg = params_c.config();
        json j = section(cfg, "train");
        if (!j.contains("profile")) j["profile"] = params_profile;
        const auto tc = harness::TrainConfig::from_json(j);
        const auto registry = load_registry(params_registry, "").restricted_to(tc.enabled_groups);
        const auto n = decoder::count_params(decoder::init_params(tc.decoder, registry, 0));
        json eff = tc.decoder.to_json();
        eff["registry"] = registry.to_json();
        emit(params_c, "params.json",
             stamp({{"projections", n.projections},
                    {"diff_attention", n.diff_attention},
                    {"align_attention", n.align_attention},
                    {"mlp", n.mlp},
                    {"total", n.total()}},
                   "params", eff));
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Cli cli(out);
    std::vector<std::string> argv_store = {"lrep"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        cli.app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << cli.app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << cli.app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << cli.app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace lrep::cli
