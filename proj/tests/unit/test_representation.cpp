#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "../support/temp_dir.hpp"
#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/assembly.hpp"
#include "lrep/representation/lrep_io.hpp"
#include "lrep/representation/narrative_prompt.hpp"
#include "lrep/representation/provider.hpp"
#include "lrep/representation/remote_provider.hpp"
#include "lrep/representation/source_registry.hpp"

using namespace lrep::representation;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> ids_of(const std::vector<FeatureBlock>& blocks) {
    std::vector<std::string> out;
    for (const auto& b : blocks) out.push_back(b.source_id);
    return out;
}

SourceRegistry small_registry() {
    return register_sources({{"s1", 5, Group::scene},
                             {"s2", 3, Group::scene},
                             {"a1", 4, Group::aligned},
                             {"n1", 6, Group::narrative},
                             {"n2", 2, Group::narrative},
                             {"l1", 3, Group::instruction},
                             {"l2", 7, Group::instruction}});
}

using fixture::TempDir;

}  // namespace

TEST(Registry, DefaultHasNineSourcesInGroupOrder) {
    const SourceRegistry reg = default_registry();
    ASSERT_EQ(reg.size(), 9u);
    EXPECT_EQ(reg.at("te3l_caption").dim, 3072u);
    EXPECT_EQ(reg.at("ada_instruction").dim, 1536u);
    EXPECT_EQ(reg.at("clip_image_intermediate").dim, 1024u);
    EXPECT_EQ(reg.sources_in(Group::scene).size(), 3u);
    EXPECT_EQ(reg.sources_in(Group::aligned).size(), 1u);
    EXPECT_EQ(reg.sources_in(Group::narrative).size(), 2u);
    EXPECT_EQ(reg.sources_in(Group::instruction).size(), 3u);
}

TEST(Registry, RejectsDuplicateAndZeroDim) {
    EXPECT_THROW(register_sources({{"x", 3, Group::scene}, {"x", 4, Group::aligned}}), lrep::ConfigError);
    EXPECT_THROW(register_sources({{"x", 0, Group::scene}}), lrep::ConfigError);
    EXPECT_THROW(register_sources({{"", 2, Group::scene}}), lrep::ConfigError);
}

TEST(Registry, JsonRoundTrip) {
    const SourceRegistry reg = default_registry();
    EXPECT_EQ(registry_from_json(reg.to_json()), reg);
    EXPECT_THROW(registry_from_json(nlohmann::json::parse(R"([{"id":"a","dim":0,"group":"scene"}])")),
                 lrep::ConfigError);
}

TEST(Registry, RestrictionKeepsInstructionSources) {
    const SourceRegistry reg = default_registry().restricted_to({Group::scene});
    EXPECT_EQ(reg.size(), 6u);
    EXPECT_TRUE(reg.sources_in(Group::aligned).empty());
    EXPECT_EQ(reg.sources_in(Group::instruction).size(), 3u);
}

TEST(AssembleScene, DefaultOrder) {
    const SourceRegistry reg = default_registry();
    const RandomProvider provider(reg, 11);
    const auto blocks = assemble_scene(provider, reg, "ep0", phase::before);
    EXPECT_EQ(ids_of(blocks), (std::vector<std::string>{"vit", "dinov2", "clip_image_intermediate"}));
    EXPECT_EQ(blocks[2].dim(), 1024u);
}

TEST(AssembleScene, SingleSourceRegistry) {
    const SourceRegistry reg = register_sources({{"vit", 8, Group::scene}});
    const RandomProvider provider(reg, 1);
    EXPECT_EQ(assemble_scene(provider, reg, "e", phase::after).size(), 1u);
}

TEST(AssembleScene, SyntheticProviderIsDeterministic) {
    const SourceRegistry reg = default_registry();
    const RandomProvider a(reg, 5), b(reg, 5), c(reg, 6);
    EXPECT_EQ(assemble_scene(a, reg, "ep", phase::before), assemble_scene(a, reg, "ep", phase::before));
    EXPECT_EQ(assemble_scene(a, reg, "ep", phase::before), assemble_scene(b, reg, "ep", phase::before));
    EXPECT_NE(assemble_scene(a, reg, "ep", phase::before), assemble_scene(c, reg, "ep", phase::before));
    EXPECT_EQ(assemble_aligned(a, reg, "ep", phase::after), assemble_aligned(b, reg, "ep", phase::after));
}

TEST(AssembleScene, MissingSourceNamesEpisodeAndSource) {
    const SourceRegistry reg = small_registry();
    FeatureStore store;
    try {
        assemble_scene(store, reg, "ep42", phase::before);
        FAIL();
    } catch (const lrep::MissingFeatureError& e) {
        EXPECT_EQ(e.episode_id(), "ep42");
        EXPECT_EQ(e.source_id(), "s1");
    }
}

TEST(AssembleAligned, DefaultAndAblated) {
    const SourceRegistry reg = default_registry();
    const RandomProvider provider(reg, 1);
    EXPECT_EQ(ids_of(assemble_aligned(provider, reg, "e", phase::before)),
              std::vector<std::string>{"clip_image_output"});
    const SourceRegistry scene_only = reg.restricted_to({Group::scene});
    EXPECT_TRUE(assemble_aligned(provider, scene_only, "e", phase::before).empty());
}

TEST(AssembleNarrative, DefaultAndAblated) {
    const SourceRegistry reg = default_registry();
    const RandomProvider provider(reg, 1);
    EXPECT_EQ(ids_of(assemble_narrative(provider, reg, "e", phase::before)),
              (std::vector<std::string>{"bert_caption", "te3l_caption"}));
    const SourceRegistry no_nr = reg.restricted_to({Group::scene, Group::aligned});
    EXPECT_TRUE(assemble_narrative(provider, no_nr, "e", phase::before).empty());
}

TEST(AssembleNarrative, MissingCaption) {
    const SourceRegistry reg = small_registry();
    FeatureStore store;
    store.put("e", "before", {"n1", std::vector<float>(6, 0.5f), Provenance::synthetic});
    store.put("e", "before", {"n2", std::vector<float>(2, 0.5f), Provenance::synthetic});
    EXPECT_THROW(assemble_narrative(store, reg, "e", phase::before), lrep::MissingCaptionError);
    store.put_caption("e", "before", "In the image, a can.");
    EXPECT_EQ(assemble_narrative(store, reg, "e", phase::before).size(), 2u);
}

TEST(AssembleNarrative, FileProviderRoundTrip) {
    TempDir dir;
    const SourceRegistry reg = small_registry();
    const RandomProvider source(reg, 3);
    FeatureStore store;
    for (const auto& s : reg.sources()) {
        for (const char* ph : {"before", "after", "instruction"}) store.put("ep1", ph, source.get("ep1", ph, s.id));
    }
    store.put_caption("ep1", "before", "In the image, a red can stands upright.");
    store.put_caption("ep1", "after", "In the image, the red can lies on its side.");
    store.write_to(dir.path());

    const FileProvider files(dir.path());
    auto expected = assemble_narrative(source, reg, "ep1", phase::before);
    for (auto& blk : expected) blk.provenance = Provenance::file;
    EXPECT_EQ(assemble_narrative(files, reg, "ep1", phase::before), expected);
    EXPECT_EQ(*files.caption("ep1", "after"), "In the image, the red can lies on its side.");
    EXPECT_TRUE(fs::exists(dir.path() / "ep1" / "before" / "n1.lrep"));
    EXPECT_TRUE(fs::exists(dir.path() / "ep1" / "before.caption.txt"));
}

TEST(AssembleLambda, DefaultsGiveSixTokens) {
    const SourceRegistry reg = default_registry();
    const RandomProvider provider(reg, 9);
    const ProjectionTable proj = ProjectionTable::uniform_init(reg, 16, 1);
    const auto rep = assemble_lambda(assemble_scene(provider, reg, "e", phase::before),
                                     assemble_aligned(provider, reg, "e", phase::before),
                                     assemble_narrative(provider, reg, "e", phase::before), proj.view());
    EXPECT_EQ(rep.token_count(), 6u);
    EXPECT_EQ(rep.tokens.cols(), 16u);
    EXPECT_EQ(rep.indices(Group::scene), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(rep.indices(Group::aligned), (std::vector<std::size_t>{3}));
    EXPECT_EQ(rep.indices(Group::narrative), (std::vector<std::size_t>{4, 5}));
}

TEST(AssembleLambda, SceneOnly) {
    const SourceRegistry reg = default_registry().restricted_to({Group::scene});
    const RandomProvider provider(reg, 9);
    const ProjectionTable proj = ProjectionTable::uniform_init(reg, 8, 1);
    const auto rep = assemble_lambda(assemble_scene(provider, reg, "e", phase::before),
                                     assemble_aligned(provider, reg, "e", phase::before),
                                     assemble_narrative(provider, reg, "e", phase::before), proj.view());
    EXPECT_EQ(rep.token_count(), 3u);
    EXPECT_TRUE(rep.indices(Group::aligned).empty());
    EXPECT_TRUE(rep.indices(Group::narrative).empty());
}

TEST(AssembleLambda, IdentityProjectionKeepsRawValues) {
    const SourceRegistry reg = register_sources({{"s", 4, Group::scene}, {"l", 4, Group::instruction}});
    const FeatureBlock block{"s", {0.25f, -1.5f, 3.0f, 0.0f}, Provenance::synthetic};
    const ProjectionTable proj = ProjectionTable::identity(reg, 4);
    const auto rep = assemble_lambda({block}, {}, {}, proj.view());
    ASSERT_EQ(rep.token_count(), 1u);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(rep.tokens(0, j), static_cast<double>(block.values[j]));
}

TEST(AssembleLambda, AllGroupsEmptyIsError) {
    const ProjectionTable proj{4, {}};
    EXPECT_THROW(assemble_lambda({}, {}, {}, proj.view()), lrep::EmptyRepresentationError);
}

TEST(AssembleLambda, TokenCountAndPartitionProperty) {
    lrep::numerics::Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SourceSpec> specs;
        std::size_t counts[3] = {0, 0, 0};
        for (int g = 0; g < 3; ++g) {
            const std::size_t n = rng.index(3);
            for (std::size_t i = 0; i < n; ++i) {
                specs.push_back({"g" + std::to_string(g) + "_" + std::to_string(i), 1 + rng.index(6),
                                 static_cast<Group>(g)});
            }
            counts[g] = n;
        }
        specs.push_back({"lang", 3, Group::instruction});
        const SourceRegistry reg = register_sources(specs);
        const RandomProvider provider(reg, static_cast<std::uint64_t>(trial));
        const ProjectionTable proj = ProjectionTable::uniform_init(reg, 4, 3);
        if (counts[0] + counts[1] + counts[2] == 0) {
            EXPECT_THROW(gather_lambda(provider, reg, "e", phase::before), lrep::EmptyRepresentationError);
            continue;
        }
        const auto rep = project_lambda(gather_lambda(provider, reg, "e", phase::before), proj.view());
        EXPECT_EQ(rep.token_count(), counts[0] + counts[1] + counts[2]);
        std::vector<int> seen(rep.token_count(), 0);
        for (Group g : {Group::scene, Group::aligned, Group::narrative}) {
            EXPECT_EQ(rep.indices(g).size(), counts[static_cast<int>(g)]);
            for (std::size_t i : rep.indices(g)) seen[i] += 1;
        }
        for (int s : seen) EXPECT_EQ(s, 1);
        // determinism
        EXPECT_EQ(project_lambda(gather_lambda(provider, reg, "e", phase::before), proj.view()), rep);
    }
}

TEST(AssembleLambda, AblationCommutesWithAssembly) {
    const SourceRegistry full = default_registry();
    const RandomProvider provider(full, 21);
    const ProjectionTable proj = ProjectionTable::uniform_init(full, 8, 4);
    const auto assembled = project_lambda(gather_lambda(provider, full, "ep", phase::after), proj.view());
    for (Group g : {Group::scene, Group::aligned, Group::narrative}) {
        std::set<Group> enabled = {Group::scene, Group::aligned, Group::narrative};
        enabled.erase(g);
        const SourceRegistry reduced = full.restricted_to(enabled);
        const auto direct = project_lambda(gather_lambda(provider, reduced, "ep", phase::after), proj.view());
        EXPECT_EQ(direct, assembled.without(g)) << to_string(g);
    }
}

TEST(AssembleLanguage, DefaultOrderAndSingleSource) {
    const SourceRegistry reg = default_registry();
    const RandomProvider provider(reg, 2);
    const ProjectionTable proj = ProjectionTable::uniform_init(reg, 8, 1);
    const auto lf = assemble_language(provider, reg, "e", proj.view());
    EXPECT_EQ(ids_of(lf.raw), (std::vector<std::string>{"bert_instruction", "clip_text", "ada_instruction"}));
    EXPECT_EQ(lf.tokens.rows(), 3u);

    const SourceRegistry one = register_sources({{"vit", 4, Group::scene}, {"clip_text", 6, Group::instruction}});
    const RandomProvider p1(one, 2);
    const ProjectionTable proj1 = ProjectionTable::uniform_init(one, 8, 1);
    EXPECT_EQ(assemble_language(p1, one, "e", proj1.view()).tokens.rows(), 1u);
}

TEST(AssembleLanguage, FileRoundTrip) {
    TempDir dir;
    const SourceRegistry reg = small_registry();
    const RandomProvider source(reg, 8);
    FeatureStore store;
    for (const auto& s : reg.sources_in(Group::instruction)) store.put("ep", "instruction", source.get("ep", "instruction", s.id));
    store.write_to(dir.path());
    const ProjectionTable proj = ProjectionTable::uniform_init(reg, 4, 1);
    const auto from_file = assemble_language(FileProvider(dir.path()), reg, "ep", proj.view());
    const auto direct = assemble_language(source, reg, "ep", proj.view());
    EXPECT_EQ(from_file.tokens, direct.tokens);
}

TEST(AssembleLanguage, MissingSource) {
    const SourceRegistry reg = small_registry();
    const ProjectionTable proj = ProjectionTable::uniform_init(reg, 4, 1);
    EXPECT_THROW(assemble_language(FeatureStore{}, reg, "ep", proj.view()), lrep::MissingFeatureError);
}

TEST(AssembleLanguage, RegistryDimMismatchIsFormatError) {
    const SourceRegistry reg = small_registry();
    FeatureStore store;
    store.put("ep", "instruction", {"l1", std::vector<float>(4, 1.0f), Provenance::file});
    const ProjectionTable proj = ProjectionTable::uniform_init(reg, 4, 1);
    EXPECT_THROW(assemble_language(store, reg, "ep", proj.view()), lrep::FormatError);
}

TEST(LrepFormat, ExactBytes) {
    const FeatureBlock block{"ab", {1.0f, -2.0f}, Provenance::file};
    const std::string bytes = encode_block(block);
    const std::string expected("LREP\x01\x00\x02\x00"
                               "ab"
                               "\x02\x00\x00\x00"
                               "\x00\x00\x80\x3f"
                               "\x00\x00\x00\xc0",
                               22);
    EXPECT_EQ(bytes, expected);
}

TEST(LrepFormat, RoundTripIsBitwise) {
    lrep::numerics::Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        FeatureBlock b;
        b.source_id = "src_" + std::to_string(trial);
        b.values.resize(1 + rng.index(64));
        for (float& v : b.values) v = static_cast<float>(rng.normal() * 1e3);
        const FeatureBlock back = decode_block(encode_block(b));
        ASSERT_EQ(back.values.size(), b.values.size());
        EXPECT_EQ(0, std::memcmp(back.values.data(), b.values.data(), b.values.size() * sizeof(float)));
        EXPECT_EQ(back.source_id, b.source_id);
    }
}

TEST(LrepFormat, RejectsCorruptInput) {
    const std::string good = encode_block({"x", {1.0f, 2.0f}, Provenance::file});
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_block(bad_magic), lrep::FormatError);
    EXPECT_THROW(decode_block(good.substr(0, good.size() - 1)), lrep::FormatError);
    std::string bad_version = good;
    bad_version[4] = 2;
    EXPECT_THROW(decode_block(bad_version), lrep::FormatError);
    EXPECT_THROW(decode_block(good + "xxxx"), lrep::FormatError);
}

TEST(NarrativePrompt, AssetMatchesEmbeddedTemplate) {
    const std::string asset = read_file(fs::path(LREP_SOURCE_DIR) / "assets" / "narrative_prompt.txt");
    EXPECT_EQ(asset, kNarrativePromptTemplate);
    EXPECT_EQ(kNarrativePromptTemplate.rfind("Give a clear, comprehensive and detailed description", 0), 0u);
}

TEST(NarrativePrompt, RendersInstruction) {
    const std::string p = render_narrative_prompt("pick green rice chip bag");
    EXPECT_NE(p.find("Sentence string: 'pick green rice chip bag' ."), std::string::npos);
    EXPECT_EQ(p.find("{instruction}"), std::string::npos);
}

TEST(ExclusiveProvider, ConcurrentReadsAgree) {
    const SourceRegistry reg = default_registry();
    const RandomProvider inner(reg, 4);
    const ExclusiveProvider guarded(inner);
    const auto expected = inner.get("e", "before", "vit");
    std::vector<std::thread> threads;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i)
                if (guarded.get("e", "before", "vit") != expected) ++mismatches;
        });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(mismatches.load(), 0);
}

namespace {

/// Local embed server; fails the first `fail_first` requests with HTTP 503.
class FakeEmbedServer {
public:
    explicit FakeEmbedServer(int fail_first = 0, int status_override = 0) : fail_first_(fail_first) {
        server_.Post("/v1/embed", [this, status_override](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            if (status_override != 0) {
                res.status = status_override;
                return;
            }
            if (hits_ <= fail_first_) {
                res.status = 503;
                return;
            }
            const auto j = nlohmann::json::parse(req.body);
            last_payload_type_ = j.at("payload_type").get<std::string>();
            const std::size_t dim = j.at("source_id") == "img" ? 3 : 2;
            nlohmann::json reply = {{"dim", dim}, {"values", nlohmann::json::array()}};
            for (std::size_t i = 0; i < dim; ++i) reply["values"].push_back(0.5 * static_cast<double>(i + 1));
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEmbedServer() {
        server_.stop();
        thread_.join();
    }
    int port() const { return port_; }
    int hits() const { return hits_; }
    std::string last_payload_type() const { return last_payload_type_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    int fail_first_;
    std::atomic<int> hits_{0};
    std::string last_payload_type_;
};

SourceRegistry remote_registry() {
    return register_sources({{"img", 3, Group::scene}, {"txt", 2, Group::instruction}});
}

RemoteConfig fast_config(int port) {
    RemoteConfig c;
    c.port = port;
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(2000);
    return c;
}

}  // namespace

TEST(RemoteProvider, FetchesAndCaches) {
    TempDir dir;
    FakeEmbedServer server;
    const RemoteProvider provider(fast_config(server.port()), remote_registry(), dir.path(),
                                  default_payload_resolver(dir.path() / "img", dir.path(), {{"ep", "pick apple"}}));
    const FeatureBlock b = provider.get("ep", "before", "img");
    EXPECT_EQ(b.values, (std::vector<float>{0.5f, 1.0f, 1.5f}));
    EXPECT_EQ(b.provenance, Provenance::remote);
    EXPECT_EQ(server.last_payload_type(), "image_path");
    EXPECT_EQ(provider.get("ep", "before", "img").values, b.values);
    EXPECT_EQ(server.hits(), 1);
    EXPECT_TRUE(fs::exists(block_path(dir.path(), "ep", "before", "img")));

    provider.get("ep", "instruction", "txt");
    EXPECT_EQ(server.last_payload_type(), "text");
}

TEST(RemoteProvider, RetriesServerErrors) {
    TempDir dir;
    FakeEmbedServer server(2);
    const RemoteProvider provider(fast_config(server.port()), remote_registry(), dir.path(),
                                  default_payload_resolver(dir.path(), dir.path(), {{"ep", "x"}}));
    EXPECT_EQ(provider.get("ep", "instruction", "txt").dim(), 2u);
    EXPECT_EQ(server.hits(), 3);
}

TEST(RemoteProvider, GivesUpAfterThreeRetries) {
    TempDir dir;
    FakeEmbedServer server(100);
    const RemoteProvider provider(fast_config(server.port()), remote_registry(), dir.path(),
                                  default_payload_resolver(dir.path(), dir.path(), {{"ep", "x"}}));
    EXPECT_THROW(provider.get("ep", "instruction", "txt"), lrep::IoError);
    EXPECT_EQ(server.hits(), 4);
}

TEST(RemoteProvider, ClientErrorIsNotRetried) {
    TempDir dir;
    FakeEmbedServer server(0, 400);
    const RemoteProvider provider(fast_config(server.port()), remote_registry(), dir.path(),
                                  default_payload_resolver(dir.path(), dir.path(), {{"ep", "x"}}));
    EXPECT_THROW(provider.get("ep", "instruction", "txt"), lrep::IoError);
    EXPECT_EQ(server.hits(), 1);
}
