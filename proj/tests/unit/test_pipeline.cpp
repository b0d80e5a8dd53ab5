#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flowmine/error.hpp"
#include "flowmine/pipeline.hpp"
#include "flowmine/synthetic.hpp"
#include "support/cases.hpp"

using namespace flowmine;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(FLOWMINE_TEST_DATA) / "synthetic_corpus.jsonl";

PipelineConfig fixture_config(const fs::path& out) {
    PipelineConfig cfg;
    cfg.corpus = kFixture;
    cfg.output_dir = out;
    cfg.embedding_provider = "synthetic";
    return cfg;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string("\"") + FLOWMINE_CLI + "\" " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Corpus small_corpus(size_t n) {
    SyntheticSpec spec;
    spec.conversations = n;
    return generate_synthetic_corpus(spec);
}

} // namespace

TEST(Config, ParsesSectionsCommentsAndQuotes) {
    auto v = parse_config_text("corpus = \"data/c.jsonl\"  # trailing\n"
                               "batch_size = 20\n"
                               "\n[extract]\nmethod = longest\ndigressions = 2\n"
                               "[completion]\nendpoint = \"http://h:1/v1 \\\"x\\\"\"\n");
    EXPECT_EQ(v.at("corpus"), "data/c.jsonl");
    EXPECT_EQ(v.at("batch_size"), "20");
    EXPECT_EQ(v.at("extract.method"), "longest");
    EXPECT_EQ(v.at("extract.digressions"), "2");
    EXPECT_EQ(v.at("completion.endpoint"), "http://h:1/v1 \"x\"");
}

TEST(Config, RejectsMalformedInput) {
    EXPECT_THROW(parse_config_text("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_text("no equals sign\n"), ConfigError);
    EXPECT_THROW(PipelineConfig::from_values({{"extract.bogus", "1"}}), ConfigError);
    EXPECT_THROW(PipelineConfig::from_values({{"batch_size", "many"}}), ConfigError);
}

TEST(Config, FromValuesResolvesPathsAndSettings) {
    auto cfg = PipelineConfig::from_values({{"corpus", "c.jsonl"},
                                            {"batch_size", "7"},
                                            {"extract.method", "maxweight"},
                                            {"extract.kappa", "0.25"},
                                            {"normalize.linkage", "single"},
                                            {"evaluate.branch_scoring", "flat"}},
                                           "/base");
    EXPECT_EQ(cfg.corpus, fs::path("/base/c.jsonl"));
    EXPECT_EQ(cfg.batch_size, 7u);
    EXPECT_EQ(cfg.method, "maxweight");
    EXPECT_DOUBLE_EQ(cfg.extractor.kappa, 0.25);
    EXPECT_EQ(cfg.eval.branch_scoring, BranchScoring::Flat);
}

TEST(Config, ValidateRejectsBadValues) {
    cases::TempDir tmp("cfg");
    auto cfg = fixture_config(tmp.path());
    EXPECT_NO_THROW(cfg.validate());
    auto bad = cfg;
    bad.batch_size = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.corpus = tmp.path() / "missing.jsonl";
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.method = "shortest";
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.embedding_provider = "magic";
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Config, HashTracksSettings) {
    PipelineConfig a, b;
    EXPECT_EQ(a.hash(), b.hash());
    b.extractor.kappa = 0.5;
    EXPECT_NE(a.hash(), b.hash());
    b = a;
    b.credentials_env = "OTHER";
    EXPECT_EQ(a.canonical().find("OTHER"), std::string::npos);
}

TEST(Hash, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Split, FirstBatchAndHeldout) {
    auto corpus = small_corpus(50);
    PipelineConfig cfg;
    cfg.batch_size = 20;
    auto s = split_corpus(corpus, cfg);
    EXPECT_FALSE(s.fallback);
    ASSERT_EQ(s.batch.size(), 20u);
    ASSERT_EQ(s.heldout.size(), 30u);
    EXPECT_EQ(s.batch.front(), corpus.conversations()[0].id);
    EXPECT_EQ(s.heldout.front(), corpus.conversations()[20].id);
}

TEST(Split, SmallCorpusFallsBackToEightyTwenty) {
    auto corpus = small_corpus(30);
    PipelineConfig cfg;
    cfg.batch_size = 20;
    auto s = split_corpus(corpus, cfg);
    EXPECT_TRUE(s.fallback);
    EXPECT_EQ(s.batch.size(), 24u);
    EXPECT_EQ(s.heldout.size(), 6u);
}

TEST(Split, SeededSampleIsAReproduciblePartition) {
    auto corpus = small_corpus(60);
    PipelineConfig cfg;
    cfg.batch_size = 20;
    cfg.sampling = "seeded";
    cfg.seed = 5;
    auto s = split_corpus(corpus, cfg);
    EXPECT_EQ(s.batch.size(), 20u);
    EXPECT_TRUE(std::is_sorted(s.batch.begin(), s.batch.end()));
    EXPECT_TRUE(std::is_sorted(s.heldout.begin(), s.heldout.end()));
    std::set<std::string> all(s.batch.begin(), s.batch.end());
    all.insert(s.heldout.begin(), s.heldout.end());
    EXPECT_EQ(all.size(), 60u);
    EXPECT_EQ(split_corpus(corpus, cfg).batch, s.batch);

    auto reversed = corpus.conversations();
    std::reverse(reversed.begin(), reversed.end());
    EXPECT_EQ(split_corpus(Corpus(reversed), cfg).batch, s.batch);

    cfg.seed = 6;
    EXPECT_NE(split_corpus(corpus, cfg).batch, s.batch);
}

TEST(Pipeline, StagesComposeToTheFullRun) {
    cases::TempDir a("full"), b("staged");
    std::ostringstream log;
    auto cfg_a = fixture_config(a.path());
    cfg_a.dot = true;
    run_pipeline(cfg_a, log);
    auto cfg_b = fixture_config(b.path());
    cfg_b.dot = true;
    for (Stage s : {Stage::Annotate, Stage::Normalize, Stage::Graph, Stage::Extract, Stage::Evaluate})
        run_stage(s, cfg_b, log);
    size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a.path())) {
        auto name = entry.path().filename();
        if (name == artifact::kManifest) continue;
        ASSERT_TRUE(fs::exists(b.path() / name)) << name;
        EXPECT_EQ(cases::slurp(entry.path()), cases::slurp(b.path() / name)) << name;
        ++compared;
    }
    EXPECT_GE(compared, 10u);
}

TEST(Pipeline, ManifestHashesMatchArtifacts) {
    cases::TempDir tmp("manifest");
    std::ostringstream log;
    auto cfg = fixture_config(tmp.path());
    run_pipeline(cfg, log);
    auto m = nlohmann::json::parse(cases::slurp(tmp.path() / artifact::kManifest));
    ASSERT_TRUE(m["artifacts"].is_object());
    for (const char* name : {artifact::kNormalized, artifact::kGraph, artifact::kFlow, artifact::kEvalReport}) {
        const auto& e = m["artifacts"][name];
        EXPECT_EQ(e["sha256"], sha256_hex(cases::slurp(tmp.path() / name))) << name;
        EXPECT_EQ(e["config_hash"], cfg.hash());
        EXPECT_EQ(e["tool_version"], tool_version());
    }
    EXPECT_EQ(m["artifacts"][artifact::kGraph]["stage"], "graph");
}

TEST(Pipeline, MissingUpstreamArtifactNamesTheStage) {
    cases::TempDir tmp("missing");
    std::ostringstream log;
    try {
        run_stage(Stage::Extract, fixture_config(tmp.path()), log);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), Stage::Extract);
        EXPECT_NE(std::string(e.what()).find("graph"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, RunGuardedMapsErrorsToExitCodes) {
    cases::TempDir tmp("guarded");
    std::ostringstream log, err;
    auto cfg = fixture_config(tmp.path());
    EXPECT_EQ(run_guarded({Stage::Evaluate}, cfg, log, err), 1);
    cfg.batch_size = 0;
    EXPECT_EQ(run_guarded({Stage::Annotate}, cfg, log, err), 2);
    EXPECT_NE(err.str().find("invalid config"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    cases::TempDir tmp("cli");
    std::string out = " -o \"" + tmp.path().string() + "\"";
    std::string corpus = " --corpus \"" + kFixture.string() + "\"";
    EXPECT_EQ(run_cli("extract" + corpus + out + " --embeddings synthetic"), 1);
    EXPECT_EQ(run_cli("pipeline --corpus /nonexistent.jsonl" + out), 2);
    EXPECT_EQ(run_cli("pipeline" + corpus + out + " --batch-size 0"), 2);
    EXPECT_EQ(run_cli("pipeline" + corpus + out + " --set extract.bogus=1"), 2);
    EXPECT_EQ(run_cli("pipeline" + corpus + out + " --embeddings synthetic"), 0);
    EXPECT_TRUE(fs::exists(tmp.path() / artifact::kFlowColang));
}

TEST(Cli, ConfigFilePathsResolveAgainstItsDirectory) {
    cases::TempDir tmp("cfgfile");
    fs::copy_file(kFixture, tmp.path() / "corpus.jsonl");
    cases::spit(tmp.path() / "run.toml", "corpus = \"corpus.jsonl\"\noutput_dir = \"out\"\n"
                                         "[embeddings]\nprovider = \"synthetic\"\n");
    EXPECT_EQ(run_cli("pipeline -c \"" + (tmp.path() / "run.toml").string() + "\""), 0);
    EXPECT_TRUE(fs::exists(tmp.path() / "out" / artifact::kEvalReport));
}
