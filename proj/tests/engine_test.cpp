// End-to-end coverage of the engine facade and the command line tool: config
// parsing and env overrides, lazy provider construction, index build caching,
// the retrieve/compose/refine/generate pipeline, and the CLI's exit codes.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "rmd/agents.hpp"
#include "rmd/corpus.hpp"
#include "rmd/diffusion.hpp"
#include "rmd/engine.hpp"
#include "rmd/errors.hpp"
#include "rmd/motion.hpp"
#include "rmd/pose_features.hpp"
#include "rmd/rng.hpp"

#include "fixture_corpus.hpp"
#include "test_helpers.hpp"

using namespace rmd;
using namespace rmdtest;
namespace fs = std::filesystem;

namespace {

FixtureLlmProvider& fixture_llm(Engine& engine) {
    return dynamic_cast<FixtureLlmProvider&>(engine.llm());
}

PoseFeatureSequence random_features(int frames, int width, std::uint64_t seed) {
    Rng rng(seed);
    PoseFeatureSequence f;
    f.width = width;
    f.data.resize(static_cast<std::size_t>(frames) * width);
    for (double& v : f.data) v = rng.normal() * 0.5;
    return f;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the installed CLI binary through the shell, capturing both streams.
CliResult run_cli(const TempDir& tmp, const std::string& args) {
    static int counter = 0;
    const std::string tag = std::to_string(counter++);
    const std::string out_path = tmp.str() + "/cli_stdout_" + tag;
    const std::string err_path = tmp.str() + "/cli_stderr_" + tag;
    const std::string cmd =
        std::string(RMD_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    int status = std::system(cmd.c_str());
    CliResult res;
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    res.out = read_text(out_path);
    res.err = read_text(err_path);
    return res;
}

std::string shq(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST_CASE("engine config parses json, files, and env overrides") {
    SUBCASE("empty object keeps defaults") {
        EngineConfig c = EngineConfig::from_json(json::object());
        CHECK(c.index_path.empty());
        CHECK(c.skeleton_path == "data/skeleton_22.json");
        CHECK(c.prompts_dir == "data/prompts");
        CHECK(c.llm_provider == "fixture");
        CHECK(c.embed_provider == "stub");
        CHECK(c.embedding_dim == 512);
        CHECK(c.retrieval.lambda == doctest::Approx(0.05));
        CHECK(c.retrieval.tau_full == doctest::Approx(0.96));
        CHECK(c.retrieval.tau_half == doctest::Approx(0.96));
        CHECK(c.agent.k == 5);
        CHECK(c.refine.t0 == doctest::Approx(0.96));
        CHECK(c.refine.steps == 50);
        CHECK(c.refine.mode == SdeditMode::Deterministic);
        CHECK(c.schedule.sigma_min == doctest::Approx(0.01));
        CHECK(c.schedule.sigma_max == doctest::Approx(10.0));
        CHECK(c.seed == 0);
    }

    SUBCASE("every key maps onto its field") {
        json j = {{"index", "idx.json"},
                  {"skeleton", "sk.json"},
                  {"masks", "mk.json"},
                  {"prompts", "pr"},
                  {"score_model", "sm.json"},
                  {"seed", 99},
                  {"llm",
                   {{"provider", "remote"},
                    {"fixtures", "fix.json"},
                    {"base_url", "http://llm.example"},
                    {"model", "m-1"}}},
                  {"embedding",
                   {{"provider", "table"},
                    {"dim", 64},
                    {"table", "tab.json"},
                    {"base_url", "http://emb.example"},
                    {"model", "e-1"}}},
                  {"retrieval", {{"lambda", 0.25}, {"tau_full", 0.5}, {"tau_half", 0.75}}},
                  {"agent", {{"k", 3}, {"temperature", 0.1}, {"max_retries", 7}}},
                  {"refine",
                   {{"t0", 0.4},
                    {"steps", 12},
                    {"mode", "stochastic"},
                    {"sigma_min", 0.02},
                    {"sigma_max", 5.0}}}};
        EngineConfig c = EngineConfig::from_json(j);
        CHECK(c.index_path == "idx.json");
        CHECK(c.skeleton_path == "sk.json");
        CHECK(c.masks_path == "mk.json");
        CHECK(c.prompts_dir == "pr");
        CHECK(c.score_model_path == "sm.json");
        CHECK(c.seed == 99);
        CHECK(c.llm_provider == "remote");
        CHECK(c.llm_fixtures_path == "fix.json");
        CHECK(c.llm_base_url == "http://llm.example");
        CHECK(c.llm_model == "m-1");
        CHECK(c.embed_provider == "table");
        CHECK(c.embedding_dim == 64);
        CHECK(c.embed_table_path == "tab.json");
        CHECK(c.embed_base_url == "http://emb.example");
        CHECK(c.embed_model == "e-1");
        CHECK(c.retrieval.lambda == doctest::Approx(0.25));
        CHECK(c.retrieval.tau_full == doctest::Approx(0.5));
        CHECK(c.retrieval.tau_half == doctest::Approx(0.75));
        CHECK(c.agent.k == 3);
        CHECK(c.agent.temperature == doctest::Approx(0.1));
        CHECK(c.agent.max_retries == 7);
        CHECK(c.refine.t0 == doctest::Approx(0.4));
        CHECK(c.refine.steps == 12);
        CHECK(c.refine.mode == SdeditMode::Stochastic);
        CHECK(c.schedule.sigma_min == doctest::Approx(0.02));
        CHECK(c.schedule.sigma_max == doctest::Approx(5.0));
    }

    SUBCASE("apply_env only touches fields with env vars set") {
        unsetenv("RMD_LLM_BASE_URL");
        unsetenv("RMD_LLM_MODEL");
        EngineConfig c;
        c.llm_base_url = "http://from-config";
        c.llm_model = "cfg-model";
        c.apply_env();
        CHECK(c.llm_base_url == "http://from-config");
        CHECK(c.llm_model == "cfg-model");

        setenv("RMD_LLM_BASE_URL", "http://from-env", 1);
        setenv("RMD_LLM_MODEL", "env-model", 1);
        c.apply_env();
        CHECK(c.llm_base_url == "http://from-env");
        CHECK(c.llm_model == "env-model");
        unsetenv("RMD_LLM_BASE_URL");
        unsetenv("RMD_LLM_MODEL");
    }

    SUBCASE("load reads the file and applies env overrides on top") {
        TempDir tmp;
        const std::string path = tmp.str() + "/config.json";
        write_json_file(path, json{{"seed", 17},
                                   {"llm", {{"provider", "remote"}, {"base_url", "http://file"}}}});
        setenv("RMD_LLM_BASE_URL", "http://env-wins", 1);
        EngineConfig c = EngineConfig::load(path);
        unsetenv("RMD_LLM_BASE_URL");
        CHECK(c.seed == 17);
        CHECK(c.llm_provider == "remote");
        CHECK(c.llm_base_url == "http://env-wins");

        CHECK_THROWS_AS(EngineConfig::load(tmp.str() + "/absent.json"), InputError);
    }
}

TEST_CASE("engine constructs providers lazily and reports bad configs") {
    SUBCASE("fixture llm without a fixtures path") {
        EngineConfig c;
        Engine engine(c);
        CHECK_THROWS_WITH_AS(engine.llm(),
                             doctest::Contains("fixture LLM provider needs llm.fixtures"),
                             InputError);
    }
    SUBCASE("unknown llm provider name") {
        EngineConfig c;
        c.llm_provider = "banana";
        Engine engine(c);
        CHECK_THROWS_WITH_AS(engine.llm(), doctest::Contains("unknown llm provider \"banana\""),
                             InputError);
    }
    SUBCASE("unknown embedding provider name") {
        EngineConfig c;
        c.embed_provider = "banana";
        Engine engine(c);
        CHECK_THROWS_WITH_AS(engine.embedder(), doctest::Contains("unknown embedding provider"),
                             InputError);
    }
    SUBCASE("database access without an index") {
        EngineConfig c;
        Engine engine(c);
        CHECK_FALSE(engine.has_db());
        CHECK_THROWS_WITH_AS(engine.db(), doctest::Contains("no index configured"), InputError);
    }
    SUBCASE("stub embedder tag reflects the configured dim") {
        EngineConfig c;
        c.embedding_dim = 16;
        Engine engine(c);
        CHECK(engine.embedder().tag() == "stub-fnv1a-16");
    }
}

TEST_CASE("db build ingests once and then serves from the cache") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    EngineConfig cfg = EngineConfig::load(fx.config_path);

    Engine cold(cfg);
    int n = run_db_build(cold, fx.motions_dir, fx.annotations_path, fx.index_path);
    CHECK(n == 20);
    CHECK(fs::exists(fx.index_path));
    CHECK(fixture_llm(cold).call_count() == 40);  // half + fine per entry
    CHECK(cold.has_db());
    CHECK(cold.db().provider_tag == "stub-fnv1a-512");
    CHECK_FALSE(cold.db().feature_stats.mean.empty());
    const std::string first_bytes = read_text(fx.index_path);

    // A fresh engine over the same config reuses every cached decomposition
    // and embedding: zero provider traffic, byte-identical index.
    Engine warm(cfg);
    CHECK(run_db_build(warm, fx.motions_dir, fx.annotations_path, fx.index_path) == 20);
    CHECK(fixture_llm(warm).call_count() == 0);
    CHECK(read_text(fx.index_path) == first_bytes);

    // A corrupted cache is discarded and rebuilt from scratch.
    write_lines(fx.index_path, {"this is not an index"});
    Engine rebuilt(cfg);
    CHECK(run_db_build(rebuilt, fx.motions_dir, fx.annotations_path, fx.index_path) == 20);
    CHECK(fixture_llm(rebuilt).call_count() == 40);
    CHECK(read_text(fx.index_path) == first_bytes);
}

TEST_CASE("decompose emits k labelled sets") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    Engine engine(EngineConfig::load(fx.config_path));

    json j = run_decompose(engine, fx.fine_prompt);
    CHECK(j.at("prompt").get<std::string>() == fx.fine_prompt);
    REQUIRE(j.at("sets").size() == 5);
    for (const json& set : j.at("sets")) {
        CHECK(set.contains("upper"));
        CHECK(set.contains("lower"));
        CHECK(set.at("fine").size() == 6);  // legs arrive merged as lower_body
        // Each set must round-trip through the struct it was printed from.
        CHECK(DecompositionSet::from_json(set).to_json() == set);
    }
    CHECK(j.at("warnings").is_array());
    CHECK(fixture_llm(engine).call_count() == 10);  // one half + one fine call per set
}

TEST_CASE("retrieve through the engine reaches all three levels") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    EngineConfig cfg = EngineConfig::load(fx.config_path);
    {
        Engine build_engine(cfg);
        run_db_build(build_engine, fx.motions_dir, fx.annotations_path, fx.index_path);
    }

    Engine engine(cfg);  // loads the index lazily from disk
    SUBCASE("full-level hit needs no llm traffic") {
        RetrievalPlan plan = run_retrieve(engine, fx.full_prompt, fx.full_length);
        CHECK(plan.level == RetrievalLevel::Full);
        CHECK(plan.selections.at(BodyPart::Full).entry_id == fx.full_entry);
        CHECK(plan.s_full == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(fixture_llm(engine).call_count() == 0);
    }
    SUBCASE("half-level pair") {
        RetrievalPlan plan = run_retrieve(engine, fx.half_prompt, fx.half_length);
        CHECK(plan.level == RetrievalLevel::Half);
        CHECK(plan.selections.at(BodyPart::UpperBody).entry_id == fx.half_entry);
        CHECK(plan.selections.at(BodyPart::LowerBody).entry_id == fx.half_entry);
    }
    SUBCASE("fine-level assembly with the arbitration agent") {
        RetrievalPlan plan = run_retrieve(engine, fx.fine_prompt, fx.fine_length);
        CHECK(plan.level == RetrievalLevel::Fine);
        CHECK(plan.selections.size() == 6);
        CHECK(plan.selections.at(BodyPart::LowerBody).entry_id == fx.fine_lower_entry);
    }
    SUBCASE("degenerate target length") {
        CHECK_THROWS_WITH_AS(run_retrieve(engine, fx.full_prompt, 1),
                             doctest::Contains("at least 2 frames"), InputError);
    }
}

TEST_CASE("compose reproduces a full-level source and rejects unknown entries") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    EngineConfig cfg = EngineConfig::load(fx.config_path);
    Engine engine(cfg);
    run_db_build(engine, fx.motions_dir, fx.annotations_path, fx.index_path);

    RetrievalPlan plan = run_retrieve(engine, fx.full_prompt, fx.full_length);
    MotionClip clip = run_compose(engine, plan, fx.full_length);

    MotionClip source = load_motion(fx.motions_dir + "/" + fx.full_entry + ".json").clip;
    REQUIRE(clip.length() == source.length());
    CHECK(clip.fps == source.fps);
    REQUIRE(clip.joint_count() == source.joint_count());
    for (int f = 0; f < clip.length(); ++f) {
        CHECK(clip.root_translation[f].x == source.root_translation[f].x);
        CHECK(clip.root_translation[f].y == source.root_translation[f].y);
        CHECK(clip.root_translation[f].z == source.root_translation[f].z);
        for (int j = 0; j < clip.joint_count(); ++j) {
            const Quaternion& a = clip.joint_rotations[f][j];
            const Quaternion& b = source.joint_rotations[f][j];
            CHECK(a.w == b.w);
            CHECK(a.x == b.x);
            CHECK(a.y == b.y);
            CHECK(a.z == b.z);
        }
    }

    RetrievalPlan bogus = plan;
    bogus.selections.at(BodyPart::Full).entry_id = "zz";
    CHECK_THROWS_WITH_AS(run_compose(engine, bogus, fx.full_length),
                         doctest::Contains("not in the index"), InputError);
}

TEST_CASE("refine honours t0, database stats, and the score model") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    EngineConfig cfg = EngineConfig::load(fx.config_path);
    {
        Engine build_engine(cfg);
        run_db_build(build_engine, fx.motions_dir, fx.annotations_path, fx.index_path);
    }

    SUBCASE("t0 = 0 passes features through before any stats check") {
        EngineConfig c = cfg;
        c.refine.t0 = 0.0;
        Engine engine(c);
        PoseFeatureSequence f = random_features(3, 5, 11);  // width clashes with the index
        PoseFeatureSequence out = run_refine(engine, f, "whatever");
        CHECK(out.width == f.width);
        CHECK(out.data == f.data);
    }

    SUBCASE("width mismatch against the index stats is an input error") {
        EngineConfig c = cfg;
        c.refine.t0 = 0.5;
        Engine engine(c);
        PoseFeatureSequence f = random_features(3, 5, 11);
        CHECK_THROWS_WITH_AS(run_refine(engine, f, "x"),
                             doctest::Contains("feature stats have width"), InputError);
    }

    SUBCASE("deterministic zero-score refinement is the noised guide, rescaled") {
        EngineConfig c = cfg;
        c.refine.t0 = 0.4;
        c.refine.steps = 6;
        c.refine.mode = SdeditMode::Deterministic;
        Engine engine(c);
        PoseFeatureSequence f = random_features(2, static_cast<int>(engine.db().feature_stats.mean.size()), 12);
        PoseFeatureSequence out = run_refine(engine, f, "x");

        const FeatureStats& stats = engine.db().feature_stats;
        const std::uint64_t refine_seed = derive_seed(c.seed, "sdedit");
        PoseFeatureSequence expect = stats.denormalize(noise_guide(
            stats.normalize(f), 0.4, c.schedule, derive_seed(refine_seed, "guide-noise")));
        CHECK(out.width == expect.width);
        CHECK(out.data == expect.data);
    }

    SUBCASE("without an index the features are refined in raw units") {
        EngineConfig c;  // no index at all
        c.refine.t0 = 0.3;
        c.refine.steps = 4;
        c.refine.mode = SdeditMode::Deterministic;
        c.seed = 5;
        Engine engine(c);
        PoseFeatureSequence f = random_features(2, 7, 13);
        PoseFeatureSequence out = run_refine(engine, f, "x");
        PoseFeatureSequence expect = noise_guide(
            f, 0.3, c.schedule, derive_seed(derive_seed(c.seed, "sdedit"), "guide-noise"));
        CHECK(out.data == expect.data);
    }
}

TEST_CASE("generate is deterministic and records its provenance") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    EngineConfig cfg = EngineConfig::load(fx.config_path);
    {
        Engine build_engine(cfg);
        run_db_build(build_engine, fx.motions_dir, fx.annotations_path, fx.index_path);
    }

    Engine a(cfg);
    GenerateResult ra = run_generate(a, fx.fine_prompt, fx.fine_length, false);
    Engine b(cfg);
    GenerateResult rb = run_generate(b, fx.fine_prompt, fx.fine_length, false);

    SUBCASE("two engines over the same config agree bitwise") {
        CHECK(ra.features.width == rb.features.width);
        CHECK(ra.features.data == rb.features.data);
        REQUIRE(ra.motion.length() == rb.motion.length());
        REQUIRE(ra.motion.joint_count() == rb.motion.joint_count());
        for (int f = 0; f < ra.motion.length(); ++f) {
            CHECK(ra.motion.root_translation[f].x == rb.motion.root_translation[f].x);
            CHECK(ra.motion.root_translation[f].y == rb.motion.root_translation[f].y);
            CHECK(ra.motion.root_translation[f].z == rb.motion.root_translation[f].z);
            for (int j = 0; j < ra.motion.joint_count(); ++j) {
                const Quaternion& qa = ra.motion.joint_rotations[f][j];
                const Quaternion& qb = rb.motion.joint_rotations[f][j];
                CHECK(qa.w == qb.w);
                CHECK(qa.x == qb.x);
                CHECK(qa.y == qb.y);
                CHECK(qa.z == qb.z);
            }
        }
        CHECK(ra.sidecar.dump() == rb.sidecar.dump());
    }

    SUBCASE("the shape of the result") {
        CHECK(ra.plan.level == RetrievalLevel::Fine);
        CHECK(ra.motion.length() == fx.fine_length);
        CHECK(ra.motion.fps == doctest::Approx(20.0));
        CHECK(ra.features.width == static_cast<int>(a.db().feature_stats.mean.size()));
        CHECK(ra.features.frames() == fx.fine_length);
    }

    SUBCASE("sidecar provenance fields") {
        const json& s = ra.sidecar;
        CHECK(s.at("schema_version").get<int>() == 1);
        CHECK(s.at("prompt").get<std::string>() == fx.fine_prompt);
        CHECK(s.at("length").get<int>() == fx.fine_length);
        CHECK(s.at("seed").get<std::uint64_t>() == fx.seed);
        CHECK(s.at("plan").at("level").get<std::string>() == "fine");
        CHECK(s.at("refine").at("seed").get<std::uint64_t>() == derive_seed(fx.seed, "sdedit"));
        CHECK(s.at("refine").at("t0").get<double>() == doctest::Approx(0.96));
        CHECK(s.at("refine").at("steps").get<int>() == 50);
        CHECK(s.at("refine").at("mode").get<std::string>() == "deterministic");
        CHECK(s.at("refine").at("sigma_min").get<double>() == doctest::Approx(0.01));
        CHECK(s.at("refine").at("sigma_max").get<double>() == doctest::Approx(10.0));
        CHECK(s.at("embedding_provider").get<std::string>() == "stub-fnv1a-512");
        CHECK(s.at("warnings").is_array());
        // The sidecar plan is the full plan, not a summary.
        CHECK(s.at("plan").dump() == ra.plan.to_json().dump());
    }

    SUBCASE("dry run stops after the plan") {
        Engine dry(cfg);
        GenerateResult r = run_generate(dry, fx.full_prompt, fx.full_length, true);
        CHECK(r.plan.level == RetrievalLevel::Full);
        CHECK(r.features.data.empty());
        CHECK(r.motion.length() == 0);
        CHECK(r.sidecar.at("plan").at("level").get<std::string>() == "full");
    }
}

TEST_CASE("command line tool wires the pipeline end to end") {
    TempDir tmp;
    FixtureCorpus fx = build_fixture_corpus(tmp.str() + "/fx");
    const std::string base = "--config " + shq(fx.config_path) + " ";

    SUBCASE("help exits cleanly") {
        CliResult r = run_cli(tmp, "--help");
        CHECK(r.code == 0);
        CHECK(r.out.find("db") != std::string::npos);
    }

    SUBCASE("db build reports the entry count") {
        CliResult r = run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                       " --annotations " + shq(fx.annotations_path) +
                                       " --out " + shq(fx.index_path));
        CHECK(r.code == 0);
        CHECK(r.out.find("indexed 20 entries") != std::string::npos);
        CHECK(fs::exists(fx.index_path));
    }

    SUBCASE("generate twice produces byte-identical artifacts") {
        REQUIRE(run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                 " --annotations " + shq(fx.annotations_path) + " --out " +
                                 shq(fx.index_path))
                    .code == 0);
        auto gen = [&](const std::string& dir) {
            fs::create_directories(dir);
            return run_cli(tmp, base + "generate --prompt " + shq(fx.fine_prompt) +
                                    " --length 20 --out-motion " + shq(dir + "/m.json") +
                                    " --out-features " + shq(dir + "/f.json") + " --sidecar " +
                                    shq(dir + "/s.json"));
        };
        CliResult r1 = gen(tmp.str() + "/run1");
        CliResult r2 = gen(tmp.str() + "/run2");
        REQUIRE(r1.code == 0);
        REQUIRE(r2.code == 0);
        for (const char* name : {"/m.json", "/f.json", "/s.json"}) {
            CHECK(read_text(tmp.str() + "/run1" + name) ==
                  read_text(tmp.str() + "/run2" + name));
        }
        json sidecar = json::parse(read_text(tmp.str() + "/run1/s.json"));
        CHECK(sidecar.at("plan").at("level").get<std::string>() == "fine");
        // The written motion parses and has the requested shape.
        MotionClip clip = load_motion(tmp.str() + "/run1/m.json").clip;
        CHECK(clip.length() == 20);
        CHECK(clip.joint_count() == 22);
    }

    SUBCASE("dry-run prints the sidecar and --seed overrides the config") {
        REQUIRE(run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                 " --annotations " + shq(fx.annotations_path) + " --out " +
                                 shq(fx.index_path))
                    .code == 0);
        CliResult with_cfg_seed = run_cli(tmp, base + "generate --prompt " +
                                                   shq(fx.full_prompt) +
                                                   " --length 17 --dry-run");
        REQUIRE(with_cfg_seed.code == 0);
        CHECK(json::parse(with_cfg_seed.out).at("seed").get<std::uint64_t>() == fx.seed);

        CliResult with_flag = run_cli(tmp, base + "--seed 7 generate --prompt " +
                                               shq(fx.full_prompt) + " --length 17 --dry-run");
        REQUIRE(with_flag.code == 0);
        json sidecar = json::parse(with_flag.out);
        CHECK(sidecar.at("seed").get<std::uint64_t>() == 7);
        CHECK(sidecar.at("refine").at("seed").get<std::uint64_t>() == derive_seed(7, "sdedit"));
    }

    SUBCASE("decompose and retrieve emit parseable json") {
        CliResult d = run_cli(tmp, base + "decompose --prompt " + shq(fx.fine_prompt));
        REQUIRE(d.code == 0);
        CHECK(json::parse(d.out).at("sets").size() == 5);

        REQUIRE(run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                 " --annotations " + shq(fx.annotations_path) + " --out " +
                                 shq(fx.index_path))
                    .code == 0);
        const std::string plan_path = tmp.str() + "/plan.json";
        CliResult r = run_cli(tmp, base + "retrieve --prompt " + shq(fx.full_prompt) +
                                       " --length 17 --out " + shq(plan_path));
        REQUIRE(r.code == 0);
        json plan = json::parse(read_text(plan_path));
        CHECK(plan.at("level").get<std::string>() == "full");

        const std::string motion_path = tmp.str() + "/composed.json";
        CliResult c = run_cli(tmp, base + "compose --plan " + shq(plan_path) +
                                       " --length 17 --out " + shq(motion_path));
        REQUIRE(c.code == 0);
        CHECK(load_motion(motion_path).clip.length() == 17);
    }

    SUBCASE("refine with t0 = 0 copies the features file verbatim") {
        REQUIRE(run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                 " --annotations " + shq(fx.annotations_path) + " --out " +
                                 shq(fx.index_path))
                    .code == 0);
        const std::string in_path = tmp.str() + "/feat_in.json";
        const std::string out_path = tmp.str() + "/feat_out.json";
        save_features(in_path, random_features(3, 263, 21));
        CliResult r = run_cli(tmp, base + "refine --features " + shq(in_path) + " --out " +
                                       shq(out_path) + " --t0 0");
        REQUIRE(r.code == 0);
        CHECK(read_text(out_path) == read_text(in_path));
    }

    SUBCASE("exit code 2 for input errors") {
        CliResult r = run_cli(tmp, "--config /nonexistent/config.json decompose --prompt hi");
        CHECK(r.code == 2);
        CHECK(r.err.find("error: ") != std::string::npos);

        // Missing required flag is also an input error, reported by the parser.
        CliResult missing = run_cli(tmp, base + "retrieve --length 17");
        CHECK(missing.code == 2);
    }

    SUBCASE("exit code 3 for provider misses, with json error envelope") {
        REQUIRE(run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                 " --annotations " + shq(fx.annotations_path) + " --out " +
                                 shq(fx.index_path))
                    .code == 0);
        CliResult plain = run_cli(tmp, base + "generate --prompt 'a totally unscripted move'" +
                                           " --length 20 --dry-run");
        CHECK(plain.code == 3);
        CHECK(plain.err.find("error: ") != std::string::npos);

        CliResult with_json = run_cli(tmp, base + "--json-errors generate --prompt " +
                                               "'a totally unscripted move' --length 20 --dry-run");
        CHECK(with_json.code == 3);
        json envelope = json::parse(with_json.err);
        CHECK(envelope.at("error").at("type").get<std::string>() == "provider_error");
        CHECK(envelope.at("exit_code").get<int>() == 3);
        CHECK_FALSE(envelope.at("error").at("message").get<std::string>().empty());
    }

    SUBCASE("exit code 4 for internal failures") {
        REQUIRE(run_cli(tmp, base + "db build --motions " + shq(fx.motions_dir) +
                                 " --annotations " + shq(fx.annotations_path) + " --out " +
                                 shq(fx.index_path))
                    .code == 0);
        const std::string model_path = tmp.str() + "/score3.json";
        write_json_file(model_path, json{{"kind", "gaussian"},
                                         {"mean", {0.0, 0.0, 0.0}},
                                         {"var", {1.0, 1.0, 1.0}}});
        const std::string in_path = tmp.str() + "/feat263.json";
        save_features(in_path, random_features(2, 263, 22));
        CliResult r = run_cli(tmp, base + "--json-errors refine --features " + shq(in_path) +
                                       " --out " + shq(tmp.str() + "/feat_o.json") +
                                       " --t0 0.5 --steps 4 --score-model " + shq(model_path));
        CHECK(r.code == 4);
        json envelope = json::parse(r.err);
        CHECK(envelope.at("error").at("type").get<std::string>() == "internal_error");
        CHECK(envelope.at("error").at("message").get<std::string>().find("reverse step") !=
              std::string::npos);
    }
}
