#include "lrep/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "lrep/errors.hpp"
#include "lrep/numerics/kernels.hpp"
#include "lrep/numerics/random.hpp"

namespace lrep::harness {

using nlohmann::json;
using numerics::Matrix;

TrainConfig TrainConfig::paper() { return {}; }

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.adam.lr = 1e-3;
    c.epochs = 30;
    c.decoder.d_model = c.decoder.d_k = c.decoder.d_v = 32;
    c.decoder.mlp_hidden = {32, 16};
    return c;
}

TrainConfig TrainConfig::profile(std::string_view name) {
    if (name == "paper") return paper();
    if (name == "desk") return desk();
    throw ConfigError("unknown profile '" + std::string(name) + "' (expected paper or desk)");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (enabled_groups.empty()) throw ConfigError("enabled_groups must be non-empty");
    if (enabled_groups.count(rep::Group::instruction) != 0)
        throw ConfigError("enabled_groups holds image groups only (SR, AR, NR)");
    if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    if (!(adam.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(adam.weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    decoder.validate();
}

json TrainConfig::to_json() const {
    json groups = json::array();
    for (rep::Group g : enabled_groups) groups.push_back(std::string(rep::ablation_tag(g)));
    return {{"lr", adam.lr},
            {"beta1", adam.beta1},
            {"beta2", adam.beta2},
            {"epsilon", adam.epsilon},
            {"weight_decay", adam.weight_decay},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"seed", seed},
            {"mode", std::string(decoder::to_string(mode))},
            {"enabled_groups", groups},
            {"threshold", threshold},
            {"skip_missing", skip_missing},
            {"decoder", decoder.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    TrainConfig c = profile(j.value("profile", std::string("paper")));
    try {
        c.adam.lr = j.value("lr", c.adam.lr);
        c.adam.beta1 = j.value("beta1", c.adam.beta1);
        c.adam.beta2 = j.value("beta2", c.adam.beta2);
        c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
        c.adam.weight_decay = j.value("weight_decay", c.adam.weight_decay);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("mode")) c.mode = decoder::attention_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("enabled_groups")) {
            c.enabled_groups.clear();
            for (const auto& g : j.at("enabled_groups")) c.enabled_groups.insert(rep::group_from_string(g.get<std::string>()));
        }
        c.threshold = j.value("threshold", c.threshold);
        c.skip_missing = j.value("skip_missing", c.skip_missing);
        if (j.contains("decoder")) {
            json d = c.decoder.to_json();
            d.merge_patch(j.at("decoder"));
            c.decoder = decoder::DecoderConfig::from_json(d);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::uint64_t TrainConfig::digest() const { return numerics::fnv1a64(to_json().dump()); }

double ConfusionMatrix::accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(total());
}

void ConfusionMatrix::add(double p_success, int label) {
    const bool predicted = p_success >= threshold;
    if (predicted) (label == 1 ? tp : fp) += 1;
    else (label == 1 ? fn : tn) += 1;
}

json ConfusionMatrix::to_json() const {
    return {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}, {"threshold", threshold}, {"accuracy", accuracy()}};
}

double significance_test(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    if (a.total() == 0 || b.total() == 0) throw ConfigError("significance_test: empty confusion matrix");
    if (a.total() != b.total()) throw ConfigError("significance_test: matrices cover different sample counts");
    const double n = static_cast<double>(a.total());
    const double pa = a.accuracy(), pb = b.accuracy();
    const double pooled = (static_cast<double>(a.correct()) + static_cast<double>(b.correct())) / (2.0 * n);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (2.0 / n));
    if (se == 0.0) return pa == pb ? 1.0 : 0.0;
    const double z = (pa - pb) / se;
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

LoadedSet load_features(std::span<const Episode> episodes, const rep::EmbeddingProvider& provider,
                        const rep::SourceRegistry& registry, bool skip_missing) {
    LoadedSet out;
    out.items.reserve(episodes.size());
    for (const Episode& e : episodes) {
        try {
            out.items.push_back(
                {e.episode_id, rep::gather_episode(provider, registry, e.episode_id, e.before_ref, e.after_ref), e.label});
        } catch (const Error& err) {
            if (!skip_missing) throw;
            out.failures.push_back({e.episode_id, err.kind(), err.what()});
        }
    }
    return out;
}

Predictor model_predictor(const DecoderParams& params, AttentionMode mode) {
    return [&params, mode](const rep::EpisodeFeatures& f) { return decoder::forward(f, params, mode).p_success; };
}

ConfusionMatrix evaluate(const Predictor& predict, std::span<const LabelledFeatures> items, double threshold) {
    ConfusionMatrix m;
    m.threshold = threshold;
    for (const LabelledFeatures& item : items) m.add(predict(item.features), item.label);
    return m;
}

EvalReport evaluate(const decoder::Checkpoint& checkpoint, std::span<const Episode> episodes,
                    const rep::EmbeddingProvider& provider, double threshold, bool skip_missing) {
    LoadedSet set = load_features(episodes, provider, checkpoint.params.registry, skip_missing);
    return {evaluate(model_predictor(checkpoint.params, checkpoint.mode), set.items, threshold),
            std::move(set.failures)};
}

std::size_t best_epoch(std::span<const double> val_accuracy) {
    if (val_accuracy.empty()) throw ConfigError("best_epoch: no epochs");
    std::size_t best = 0;
    for (std::size_t i = 1; i < val_accuracy.size(); ++i)
        if (val_accuracy[i] > val_accuracy[best]) best = i;
    return best;
}

namespace {

std::string norms_report(const DecoderParams& params) {
    std::ostringstream os;
    os << std::setprecision(6);
    for (std::size_t i = 0; i < params.store.size(); ++i)
        os << (i ? ", " : "") << params.store.name(i) << "=" << std::sqrt(params.store.at(i).squared_norm());
    return os.str();
}

}  // namespace

TrainResult train(std::span<const LabelledFeatures> train_set, std::span<const LabelledFeatures> val,
                  const TrainConfig& config, const rep::SourceRegistry& registry,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (train_set.empty()) throw ConfigError("train: empty training set");
    if (val.empty()) throw ConfigError("train: empty validation set");

    DecoderParams params = decoder::init_params(config.decoder, registry, numerics::derive_seed(config.seed, "init"));
    numerics::AdamState adam = numerics::make_adam_state(config.adam, params.store.values());
    numerics::Rng rng(numerics::derive_seed(config.seed, "batches"));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<Matrix> grads;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double loss_sum = 0.0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            grads.clear();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const LabelledFeatures& item = train_set[order[k]];
                decoder::LossAndGrad lg;
                try {
                    lg = decoder::loss_and_grad(item.features, item.label, params, config.mode);
                } catch (const NumericError& e) {
                    throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + " batch " +
                                        std::to_string(batch) + " episode '" + item.episode_id +
                                        "'; parameter norms: " + norms_report(params));
                }
                batch_loss += lg.loss;
                if (grads.empty()) {
                    grads = std::move(lg.grads);
                } else {
                    for (std::size_t p = 0; p < grads.size(); ++p) numerics::accumulate(grads[p], lg.grads[p]);
                }
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                    std::to_string(batch) + "; parameter norms: " + norms_report(params));
            const double inv = 1.0 / static_cast<double>(end - start);
            for (Matrix& g : grads) g = numerics::scale(g, inv);
            numerics::adam_step(params.store.values(), grads, adam);
            loss_sum += batch_loss;
        }
        const double epoch_loss = loss_sum / static_cast<double>(train_set.size());
        const double acc = evaluate(model_predictor(params, config.mode), val, config.threshold).accuracy();
        result.train_loss.push_back(epoch_loss);
        result.val_accuracy.push_back(acc);
        if (epoch == 0 || acc > result.val_accuracy[result.best_epoch]) {
            result.best_epoch = epoch;
            result.best = decoder::round_to_storage(params);
        }
        if (on_epoch) on_epoch({epoch, epoch_loss, acc});
    }
    return result;
}

json RunResult::to_json() const {
    return {{"train_loss", train_loss},       {"val_accuracy", val_accuracy},
            {"best_epoch", best_epoch},       {"test", test.to_json()},
            {"seeds", seeds},                 {"mean_accuracy", mean_accuracy},
            {"std_accuracy", std_accuracy},   {"config_digest", decoder::digest_hex(config_digest)}};
}

std::string RunResult::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(17) << "epoch,train_loss,val_accuracy,best\n";
    for (std::size_t i = 0; i < train_loss.size(); ++i)
        os << i << ',' << train_loss[i] << ',' << val_accuracy[i] << ',' << (i == best_epoch ? 1 : 0) << '\n';
    return os.str();
}

json checkpoint_metadata(const TrainConfig& config, const RunResult& result) {
    return {{"train_config", config.to_json()},
            {"train_config_digest", decoder::digest_hex(config.digest())},
            {"best_epoch", result.best_epoch},
            {"val_accuracy", result.val_accuracy.at(result.best_epoch)}};
}

RunOutput run_experiment(const Experiment& ex, const TrainConfig& config,
                         const std::optional<std::filesystem::path>& checkpoint,
                         const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (ex.provider == nullptr) throw ConfigError("run_experiment: no provider");
    const rep::SourceRegistry registry = ex.registry.restricted_to(config.enabled_groups);
    const auto load = [&](const std::vector<std::string>& ids) {
        return load_features(dataset::select(ex.episodes, ids), *ex.provider, registry).items;
    };
    const auto train_set = load(ex.split.train);
    const auto val_set = load(ex.split.val);
    const auto test_set = load(ex.split.test);

    TrainResult tr = train(train_set, val_set, config, registry, on_epoch);
    RunResult r;
    r.train_loss = std::move(tr.train_loss);
    r.val_accuracy = std::move(tr.val_accuracy);
    r.best_epoch = tr.best_epoch;
    r.test = evaluate(model_predictor(tr.best, config.mode), test_set, config.threshold);
    r.seeds = {config.seed};
    r.mean_accuracy = r.test.accuracy();
    r.std_accuracy = 0.0;
    r.config_digest = config.digest();
    if (checkpoint) decoder::save_checkpoint(*checkpoint, tr.best, config.mode, checkpoint_metadata(config, r));
    return {std::move(r), std::move(tr.best)};
}

std::vector<AblationCondition> representation_conditions() {
    using G = rep::Group;
    return {{"(i) AR+NR", {G::aligned, G::narrative}},
            {"(ii) SR+NR", {G::scene, G::narrative}},
            {"(iii) SR+AR", {G::scene, G::aligned}},
            {"(iv) SR", {G::scene}},
            {"(v) AR", {G::aligned}},
            {"(vi) NR", {G::narrative}},
            {"(vii) SR+AR+NR", {G::scene, G::aligned, G::narrative}}};
}

std::vector<AblationCondition> mode_conditions() {
    using G = rep::Group;
    const std::set<G> all = {G::scene, G::aligned, G::narrative};
    return {{"self-attention", all, AttentionMode::self}, {"cross-attention", all, AttentionMode::cross}};
}

std::vector<AblationCondition> default_conditions() {
    auto c = representation_conditions();
    for (auto& m : mode_conditions()) c.push_back(std::move(m));
    return c;
}

namespace {

std::string groups_tag(const std::set<rep::Group>& groups) {
    std::string s;
    for (rep::Group g : groups) s += (s.empty() ? "" : "+") + std::string(rep::ablation_tag(g));
    return s;
}

// Runs task(i) for i in [0, n) on up to `jobs` threads; results land by index.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, std::size_t jobs, F task) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < std::min(std::max<std::size_t>(jobs, 1), n); ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace

AblationTable run_ablation(const Experiment& ex, const TrainConfig& base, std::span<const AblationCondition> conditions,
                           std::size_t jobs) {
    if (conditions.empty()) throw ConfigError("run_ablation: no conditions");
    AblationTable table;
    auto results = parallel_map<RunResult>(conditions.size(), jobs, [&](std::size_t i) {
        TrainConfig c = base;
        c.enabled_groups = conditions[i].groups;
        c.mode = conditions[i].mode;
        return run_experiment(ex, c).result;
    });
    for (std::size_t i = 0; i < conditions.size(); ++i) table.rows.push_back({conditions[i], std::move(results[i])});
    return table;
}

json AblationTable::to_json() const {
    json rows_json = json::array();
    for (const AblationRow& r : rows)
        rows_json.push_back({{"condition", r.condition.name},
                             {"groups", groups_tag(r.condition.groups)},
                             {"mode", std::string(decoder::to_string(r.condition.mode))},
                             {"accuracy", r.result.test.accuracy()},
                             {"best_epoch", r.result.best_epoch},
                             {"test", r.result.test.to_json()},
                             {"config_digest", decoder::digest_hex(r.result.config_digest)}});
    return {{"rows", rows_json}};
}

std::string AblationTable::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(17) << "condition,groups,mode,accuracy,best_epoch,tp,fp,tn,fn,config_digest\n";
    for (const AblationRow& r : rows) {
        const ConfusionMatrix& m = r.result.test;
        os << '"' << r.condition.name << "\"," << groups_tag(r.condition.groups) << ','
           << decoder::to_string(r.condition.mode) << ',' << m.accuracy() << ',' << r.result.best_epoch << ',' << m.tp
           << ',' << m.fp << ',' << m.tn << ',' << m.fn << ',' << decoder::digest_hex(r.result.config_digest) << '\n';
    }
    return os.str();
}

SweepResult summarize(std::vector<std::uint64_t> seeds, std::vector<double> accuracies) {
    if (accuracies.empty()) throw ConfigError("summarize: no runs");
    SweepResult s{std::move(seeds), std::move(accuracies), 0.0, 0.0};
    const double n = static_cast<double>(s.accuracies.size());
    const auto [lo, hi] = std::minmax_element(s.accuracies.begin(), s.accuracies.end());
    if (*lo == *hi) {
        s.mean = *lo;  // exact for identical runs
        return s;
    }
    s.mean = std::accumulate(s.accuracies.begin(), s.accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : s.accuracies) ss += (a - s.mean) * (a - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
    return s;
}

json SweepResult::to_json() const { return {{"seeds", seeds}, {"accuracies", accuracies}, {"mean", mean}, {"std", std}}; }

SweepResult seed_sweep(const Experiment& ex, const TrainConfig& base, std::size_t n_seeds, std::size_t jobs) {
    if (n_seeds < 1) throw ConfigError("seed_sweep: n_seeds must be at least 1");
    std::vector<std::uint64_t> seeds(n_seeds);
    std::iota(seeds.begin(), seeds.end(), base.seed);
    auto acc = parallel_map<double>(n_seeds, jobs, [&](std::size_t i) {
        TrainConfig c = base;
        c.seed = seeds[i];
        return run_experiment(ex, c).result.test.accuracy();
    });
    return summarize(std::move(seeds), std::move(acc));
}

json VideoResult::to_json() const {
    return {{"success", success},
            {"first_success", first_success ? json(*first_success) : json(nullptr)},
            {"probabilities", probabilities}};
}

VideoResult classify_video(const Predictor& predict, const Episode& episode, const rep::EmbeddingProvider& provider,
                           const rep::SourceRegistry& registry, double threshold) {
    VideoResult r;
    for (const dataset::VideoPair& pair : dataset::video_pairs(episode)) {
        const double p = predict(rep::gather_episode(provider, registry, episode.episode_id, pair.before, pair.after));
        r.probabilities.push_back(p);
        if (p >= threshold && !r.first_success) r.first_success = pair.n;
    }
    r.success = r.first_success.has_value();
    return r;
}

VideoResult classify_video(const decoder::Checkpoint& checkpoint, const Episode& episode,
                           const rep::EmbeddingProvider& provider, double threshold) {
    return classify_video(model_predictor(checkpoint.params, checkpoint.mode), episode, provider,
                          checkpoint.params.registry, threshold);
}

}  // namespace lrep::harness
