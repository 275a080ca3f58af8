#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../support/attention_oracle.hpp"
#include "../support/toy_model.hpp"
#include "lrep/decoder/checkpoint.hpp"
#include "lrep/decoder/decoder.hpp"
#include "lrep/errors.hpp"
#include "lrep/numerics/kernels.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/lrep_io.hpp"

using namespace lrep::decoder;
using lrep::numerics::Matrix;
using lrep::numerics::Rng;
namespace rep = lrep::representation;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.data()) x = rng.uniform(-1.0, 1.0);
    return m;
}

oracle::Grid to_grid(const Matrix& m) {
    oracle::Grid g(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
    return g;
}

double max_abs_diff(const Matrix& a, const oracle::Grid& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b[i][j]));
    return d;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

AttentionBlockParams random_block(Rng& rng, std::size_t d_in_q, std::size_t d_in_kv, std::size_t dk,
                                  std::size_t dv) {
    return {random_matrix(rng, d_in_q, dk), random_matrix(rng, d_in_kv, dk), random_matrix(rng, d_in_kv, dv), 1};
}

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
    Matrix out(perm.size(), m.cols());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], j);
    return out;
}

DecoderConfig small_config(std::size_t d) {
    DecoderConfig c;
    c.d_model = c.d_k = c.d_v = d;
    c.mlp_hidden = {5};
    return c;
}

}  // namespace

TEST(CrossAttention, SingleKeyCollapsesToValue) {
    Rng rng(1);
    const auto w = random_block(rng, 3, 3, 4, 2);
    const Matrix x_a = random_matrix(rng, 5, 3);
    const Matrix x_b = random_matrix(rng, 1, 3);
    const Matrix out = cross_attention(x_a, x_b, w.view());
    const Matrix expected = lrep::numerics::matmul(x_b, w.w_v);
    ASSERT_EQ(out.rows(), 5u);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(out(i, j), expected(0, j));
}

TEST(CrossAttention, IdentityTwoByTwoAgainstOracle) {
    const Matrix eye = Matrix::identity(2);
    const AttentionBlockParams w{eye, eye, eye, 1};
    const Matrix weights = attention_weights(eye, eye, w.view());
    // logits are I / sqrt(2)
    const double e = std::exp(1.0 / std::sqrt(2.0));
    EXPECT_NEAR(weights(0, 0), e / (e + 1.0), 1e-15);
    EXPECT_NEAR(weights(0, 1), 1.0 / (e + 1.0), 1e-15);
    const Matrix out = cross_attention(eye, eye, w.view());
    const auto expected = oracle::attention(to_grid(eye), to_grid(eye), to_grid(eye), to_grid(eye), to_grid(eye));
    EXPECT_LT(max_abs_diff(out, expected), 1e-15);
    EXPECT_NEAR(out(0, 0), 0.66976155, 1e-8);
}

TEST(CrossAttention, IdenticalKeysGiveSharedValue) {
    Rng rng(2);
    const auto w = random_block(rng, 4, 4, 3, 3);
    const Matrix shared = random_matrix(rng, 1, 4);
    Matrix x_b(3, 4);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) x_b(i, j) = shared(0, j);
    const Matrix out = cross_attention(random_matrix(rng, 2, 4), x_b, w.view());
    const Matrix expected = lrep::numerics::matmul(shared, w.w_v);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out(i, j), expected(0, j), 1e-15);
}

TEST(CrossAttention, Errors) {
    Rng rng(3);
    const auto w = random_block(rng, 3, 3, 2, 2);
    EXPECT_THROW(cross_attention(random_matrix(rng, 2, 3), Matrix(0, 3), w.view()), lrep::EmptyKeysError);
    EXPECT_THROW(cross_attention(random_matrix(rng, 2, 4), random_matrix(rng, 2, 3), w.view()), lrep::ShapeError);
}

TEST(CrossAttention, MatchesBruteForceOracle) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t dq = 1 + rng.index(5), dkv = 1 + rng.index(5), dk = 1 + rng.index(5), dv = 1 + rng.index(5);
        const auto w = random_block(rng, dq, dkv, dk, dv);
        const Matrix x_a = random_matrix(rng, 1 + rng.index(5), dq);
        const Matrix x_b = random_matrix(rng, 1 + rng.index(5), dkv);
        const auto expected = oracle::attention(to_grid(x_a), to_grid(x_b), to_grid(w.w_q), to_grid(w.w_k), to_grid(w.w_v));
        EXPECT_LT(max_abs_diff(cross_attention(x_a, x_b, w.view()), expected), 1e-10);
    }
}

TEST(CrossAttention, Properties) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng.index(6);
        const auto w = random_block(rng, d, d, 1 + rng.index(6), 1 + rng.index(6));
        const Matrix x_a = random_matrix(rng, 1 + rng.index(6), d);
        const Matrix x_b = random_matrix(rng, 1 + rng.index(6), d);
        const Matrix out = cross_attention(x_a, x_b, w.view());

        const Matrix a = attention_weights(x_a, x_b, w.view());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double s = 0;
            for (double v : a.row(i)) s += v;
            EXPECT_NEAR(s, 1.0, 1e-12);
        }

        std::vector<std::size_t> qp(x_a.rows()), kp(x_b.rows());
        std::iota(qp.begin(), qp.end(), 0);
        std::iota(kp.begin(), kp.end(), 0);
        rng.shuffle(std::span(qp));
        rng.shuffle(std::span(kp));
        EXPECT_EQ(cross_attention(permute_rows(x_a, qp), x_b, w.view()), permute_rows(out, qp));
        EXPECT_LT(max_abs_diff(cross_attention(x_a, permute_rows(x_b, kp), w.view()), out), 1e-10);

        std::vector<std::size_t> dup;
        for (std::size_t i = 0; i < x_b.rows(); ++i) dup.insert(dup.end(), {i, i});
        EXPECT_LT(max_abs_diff(cross_attention(x_a, permute_rows(x_b, dup), w.view()), out), 1e-10);
    }
}

TEST(CrossAttention, MultiHeadSplitsColumns) {
    Rng rng(6);
    const AttentionBlockParams w{random_matrix(rng, 4, 4), random_matrix(rng, 4, 4), random_matrix(rng, 4, 6), 2};
    const Matrix x_a = random_matrix(rng, 3, 4), x_b = random_matrix(rng, 5, 4);
    const Matrix out = cross_attention(x_a, x_b, w.view());
    ASSERT_EQ(out.cols(), 6u);
    for (std::size_t h = 0; h < 2; ++h) {
        const AttentionBlockParams head{lrep::numerics::slice(w.w_q, 0, 4, 2 * h, 2),
                                        lrep::numerics::slice(w.w_k, 0, 4, 2 * h, 2),
                                        lrep::numerics::slice(w.w_v, 0, 4, 3 * h, 3), 1};
        const Matrix part = cross_attention(x_a, x_b, head.view());
        EXPECT_LT(max_abs_diff(lrep::numerics::slice(out, 0, 3, 3 * h, 3), part), 1e-14);
    }
}

class DefaultDecoder : public ::testing::Test {
protected:
    void SetUp() override {
        registry = rep::default_registry();
        DecoderConfig c = small_config(8);
        params = init_params(c, registry, 3);
        provider = std::make_unique<rep::RandomProvider>(registry, 17);
        features = rep::gather_episode(*provider, registry, "ep");
    }
    rep::SourceRegistry registry;
    DecoderParams params;
    std::unique_ptr<rep::RandomProvider> provider;
    rep::EpisodeFeatures features;
};

TEST_F(DefaultDecoder, DiffAndAlignShapes) {
    const auto proj = params.projector();
    const auto before = rep::project_lambda(features.before, proj);
    const auto after = rep::project_lambda(features.after, proj);
    const Matrix h_diff = compute_diff(after, before, params);
    EXPECT_EQ(h_diff.rows(), 6u);
    const auto lang = rep::assemble_language(*provider, registry, "ep", proj);
    EXPECT_EQ(lang.tokens.rows(), 3u);
    const Matrix h_align = compute_align(h_diff, lang, params);
    EXPECT_EQ(h_align.rows(), 6u);
    EXPECT_EQ(h_align.cols(), params.config.d_v);

    const PredictionOutput out = forward(features, params, AttentionMode::cross);
    EXPECT_EQ(out.h_diff, h_diff);
    EXPECT_EQ(out.h_align, h_align);
    EXPECT_EQ(out.p_success, mlp_head(h_align, params).p_success);
}

TEST_F(DefaultDecoder, SameImageDiffIsSelfAttention) {
    const auto proj = params.projector();
    const auto before = rep::project_lambda(features.before, proj);
    EXPECT_EQ(compute_diff(before, before, params), self_attention(before.tokens, params.diff_attention()));

    rep::EpisodeFeatures same = features;
    same.after = same.before;
    const PredictionOutput out = forward(same, params, AttentionMode::cross);
    EXPECT_EQ(out.h_diff, self_attention(before.tokens, params.diff_attention()));
}

TEST_F(DefaultDecoder, SelfModeDiffersFromCross) {
    const double cross = forward(features, params, AttentionMode::cross).p_success;
    const double self = forward(features, params, AttentionMode::self).p_success;
    EXPECT_NE(cross, self);
    EXPECT_EQ(forward(features, params, AttentionMode::self).h_diff.rows(), 6u);
}

TEST_F(DefaultDecoder, ForwardIsBitwiseDeterministic) {
    const auto a = forward(features, params, AttentionMode::cross);
    const auto b = forward(features, params, AttentionMode::cross);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.h_align, b.h_align);
}

TEST_F(DefaultDecoder, MismatchedStructureIsShapeError) {
    rep::EpisodeFeatures broken = features;
    broken.after = broken.after.without(rep::Group::narrative);
    EXPECT_THROW(forward(broken, params, AttentionMode::cross), lrep::ShapeError);
    rep::EpisodeFeatures no_lang = features;
    no_lang.language.clear();
    EXPECT_THROW(forward(no_lang, params, AttentionMode::cross), lrep::EmptyKeysError);
}

TEST(ComputeDiff, SingleTokenIsBeforeTimesWv) {
    const auto reg = rep::register_sources({{"s", 4, rep::Group::scene}, {"l", 4, rep::Group::instruction}});
    const DecoderParams params = init_params(small_config(4), reg, 1);
    const rep::RandomProvider provider(reg, 2);
    const auto proj = params.projector();
    const auto before = rep::project_lambda(rep::gather_lambda(provider, reg, "e", "before"), proj);
    const auto after = rep::project_lambda(rep::gather_lambda(provider, reg, "e", "after"), proj);
    const Matrix h_diff = compute_diff(after, before, params);
    EXPECT_EQ(h_diff, lrep::numerics::matmul(before.tokens, params.store.at("diff.w_v")));
}

TEST(ComputeAlign, SingleLanguageTokenAndOracle) {
    Rng rng(8);
    const auto reg = rep::register_sources({{"s", 2, rep::Group::scene}, {"l", 2, rep::Group::instruction}});
    DecoderConfig c = small_config(2);
    const DecoderParams params = init_params(c, reg, 5);
    const Matrix h_diff = random_matrix(rng, 3, 2);
    rep::LanguageFeature lang;
    lang.tokens = random_matrix(rng, 1, 2);
    const Matrix out = compute_align(h_diff, lang, params);
    const Matrix lv = lrep::numerics::matmul(lang.tokens, params.store.at("align.w_v"));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(out(i, j), lv(0, j));

    lang.tokens = random_matrix(rng, 2, 2);
    const auto expected = oracle::attention(to_grid(h_diff), to_grid(lang.tokens), to_grid(params.store.at("align.w_q")),
                                            to_grid(params.store.at("align.w_k")), to_grid(params.store.at("align.w_v")));
    EXPECT_LT(max_abs_diff(compute_align(h_diff, lang, params), expected), 1e-12);

    lang.tokens = Matrix(0, 2);
    EXPECT_THROW(compute_align(h_diff, lang, params), lrep::EmptyKeysError);
}

TEST(MlpHead, ZeroWeightsGiveHalf) {
    const auto reg = rep::register_sources({{"s", 2, rep::Group::scene}, {"l", 2, rep::Group::instruction}});
    DecoderParams params = init_params(small_config(3), reg, 1);
    for (std::size_t i = 0; i < params.store.size(); ++i)
        if (params.store.name(i).rfind("mlp.", 0) == 0) params.store.at(i).fill(0.0);
    Rng rng(1);
    const auto out = mlp_head(random_matrix(rng, 4, 3), params);
    EXPECT_EQ(out.logits, Matrix(1, 2));
    EXPECT_EQ(out.p_success, 0.5);
}

TEST(MlpHead, LogitsZeroLn3GiveThreeQuarters) {
    const auto reg = rep::register_sources({{"s", 2, rep::Group::scene}, {"l", 2, rep::Group::instruction}});
    DecoderConfig c = small_config(3);
    c.mlp_hidden = {};
    DecoderParams params = init_params(c, reg, 1);
    params.store.at("mlp.0.weight").fill(0.0);
    params.store.at("mlp.0.bias") = Matrix::from_rows({{0.0, std::log(3.0)}});
    const auto out = mlp_head(Matrix(2, 3, 0.4), params);
    EXPECT_NEAR(out.p_success, 0.75, 1e-15);
}

TEST(MlpHead, ProbabilityInRangeAndEmptyRejected) {
    Rng rng(9);
    const auto reg = rep::register_sources({{"s", 2, rep::Group::scene}, {"l", 2, rep::Group::instruction}});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        DecoderParams params = init_params(small_config(4), reg, seed);
        for (Matrix& m : params.store.values())
            for (double& x : m.data()) x *= 20.0;
        const double p = mlp_head(random_matrix(rng, 3, 4), params).p_success;
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    EXPECT_THROW(mlp_head(Matrix(0, 4), init_params(small_config(4), reg, 0)), lrep::ShapeError);
}

TEST(MlpHead, FirstTokenPooling) {
    const auto reg = rep::register_sources({{"s", 2, rep::Group::scene}, {"l", 2, rep::Group::instruction}});
    DecoderConfig c = small_config(3);
    c.pooling = Pooling::first_token;
    const DecoderParams params = init_params(c, reg, 2);
    Matrix h = Matrix::from_rows({{0.1, 0.2, 0.3}, {5, 5, 5}});
    const double p1 = mlp_head(h, params).p_success;
    h(1, 0) = -7;
    EXPECT_EQ(mlp_head(h, params).p_success, p1);
}

TEST(CountParams, ClosedForms) {
    const auto reg = rep::register_sources({{"s", 5, rep::Group::scene}, {"l", 3, rep::Group::instruction}});
    DecoderConfig c;
    c.d_model = 8;
    c.d_k = 6;
    c.d_v = 8;
    c.mlp_hidden = {};
    const ParamCount n = count_params(init_params(c, reg, 0));
    EXPECT_EQ(n.diff_attention + n.align_attention, 2 * (8 * 6 * 2 + 8 * 8));
    EXPECT_EQ(n.projections, (5 + 3) * 8u);
    EXPECT_EQ(n.mlp, 8 * 2 + 2u);

    c.mlp_hidden = {4};
    const ParamCount a = count_params(init_params(c, reg, 0));
    c.mlp_hidden = {5};
    const ParamCount b = count_params(init_params(c, reg, 0));
    EXPECT_EQ(b.total() - a.total(), 8 + 1 + 2u);
    EXPECT_EQ(b.total(), init_params(c, reg, 0).store.scalar_count());
}

TEST(CountParams, DefaultConfig) {
    const ParamCount n = count_params(init_params(DecoderConfig{}, rep::default_registry(), 0));
    // projections: (768*2 + 1024 + 512 + 768 + 3072 + 768 + 512 + 1536) * 256
    EXPECT_EQ(n.projections, 9728u * 256u);
    EXPECT_EQ(n.diff_attention, 3u * 256u * 256u);
    EXPECT_EQ(n.mlp, 256u * 256u + 256u + 256u * 64u + 64u + 64u * 2u + 2u);
}

TEST(Config, Validation) {
    DecoderConfig c = small_config(4);
    c.heads = 3;
    EXPECT_THROW(c.validate(), lrep::ConfigError);
    c = small_config(4);
    c.residual = true;
    c.d_v = 2;
    EXPECT_THROW(c.validate(), lrep::ConfigError);
    c = small_config(4);
    EXPECT_EQ(DecoderConfig::from_json(c.to_json()), c);
}

TEST(Gradients, FullDecoderMatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const toy::Instance inst = toy::make(seed);
        EXPECT_LT(toy::check(inst, AttentionMode::cross).max_relative_error, 1e-4) << "seed " << seed;
        EXPECT_LT(toy::check(inst, AttentionMode::self).max_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(Gradients, OptionalBlocksMatchFiniteDifferences) {
    DecoderConfig c = small_config(4);
    c.heads = 2;
    c.residual = true;
    c.layer_norm = true;
    c.pooling = Pooling::first_token;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        EXPECT_LT(toy::check(toy::make(seed, c), AttentionMode::cross).max_relative_error, 1e-4);
    }
}

TEST(Gradients, LabelValidation) {
    const toy::Instance inst = toy::make(3);
    EXPECT_THROW(loss_and_grad(inst.features, 2, inst.params, AttentionMode::cross), lrep::ConfigError);
}

TEST(Checkpoint, RoundTripAndDigest) {
    const toy::Instance inst = toy::make(4);
    const std::string bytes = encode_checkpoint(inst.params, AttentionMode::self, {{"seed", 4}});
    const Checkpoint ck = decode_checkpoint(bytes);
    EXPECT_EQ(ck.mode, AttentionMode::self);
    EXPECT_EQ(ck.params, round_to_storage(inst.params));
    EXPECT_EQ(ck.config["metadata"]["seed"], 4);
    EXPECT_EQ(encode_checkpoint(ck.params, ck.mode, {{"seed", 4}}), bytes);
    EXPECT_EQ(ck.digest, config_digest(model_config_json(inst.params, AttentionMode::self)));
    EXPECT_NO_THROW(decode_checkpoint(bytes, ck.digest));
    EXPECT_THROW(decode_checkpoint(bytes, ck.digest ^ 1), lrep::ConfigError);
}

TEST(Checkpoint, RejectsCorruption) {
    const toy::Instance inst = toy::make(5);
    const std::string bytes = encode_checkpoint(inst.params, AttentionMode::cross);
    std::string bad = bytes;
    bad[7] ^= 0x5a;  // inside the stored digest
    EXPECT_THROW(decode_checkpoint(bad), lrep::FormatError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), lrep::FormatError);
    EXPECT_THROW(decode_checkpoint("LRCX"), lrep::FormatError);
}
