#include "rmd/engine.hpp"

#include <cstdlib>
#include <filesystem>

#include "rmd/errors.hpp"
#include "rmd/rng.hpp"

namespace rmd {

EngineConfig EngineConfig::from_json(const json& j) {
    EngineConfig c;
    c.index_path = j.value("index", c.index_path);
    c.skeleton_path = j.value("skeleton", c.skeleton_path);
    c.masks_path = j.value("masks", c.masks_path);
    c.prompts_dir = j.value("prompts", c.prompts_dir);
    c.score_model_path = j.value("score_model", c.score_model_path);
    c.seed = j.value("seed", c.seed);

    if (j.contains("llm")) {
        const json& l = j.at("llm");
        c.llm_provider = l.value("provider", c.llm_provider);
        c.llm_fixtures_path = l.value("fixtures", c.llm_fixtures_path);
        c.llm_base_url = l.value("base_url", c.llm_base_url);
        c.llm_model = l.value("model", c.llm_model);
    }
    if (j.contains("embedding")) {
        const json& e = j.at("embedding");
        c.embed_provider = e.value("provider", c.embed_provider);
        c.embedding_dim = e.value("dim", c.embedding_dim);
        c.embed_table_path = e.value("table", c.embed_table_path);
        c.embed_base_url = e.value("base_url", c.embed_base_url);
        c.embed_model = e.value("model", c.embed_model);
    }
    if (j.contains("retrieval")) {
        const json& r = j.at("retrieval");
        c.retrieval.lambda = r.value("lambda", c.retrieval.lambda);
        c.retrieval.tau_full = r.value("tau_full", c.retrieval.tau_full);
        c.retrieval.tau_half = r.value("tau_half", c.retrieval.tau_half);
    }
    if (j.contains("agent")) {
        const json& a = j.at("agent");
        c.agent.k = a.value("k", c.agent.k);
        c.agent.temperature = a.value("temperature", c.agent.temperature);
        c.agent.max_retries = a.value("max_retries", c.agent.max_retries);
    }
    if (j.contains("refine")) {
        const json& r = j.at("refine");
        c.refine.t0 = r.value("t0", c.refine.t0);
        c.refine.steps = r.value("steps", c.refine.steps);
        if (r.contains("mode"))
            c.refine.mode = sdedit_mode_from_string(r.at("mode").get<std::string>());
        c.schedule.sigma_min = r.value("sigma_min", c.schedule.sigma_min);
        c.schedule.sigma_max = r.value("sigma_max", c.schedule.sigma_max);
    }
    return c;
}

void EngineConfig::apply_env() {
    if (const char* v = std::getenv("RMD_LLM_BASE_URL")) llm_base_url = v;
    if (const char* v = std::getenv("RMD_LLM_MODEL")) llm_model = v;
}

EngineConfig EngineConfig::load(const std::string& path) {
    EngineConfig c = from_json(read_json_file(path));
    c.apply_env();
    return c;
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {}

LlmProvider& Engine::llm() {
    if (!llm_) {
        if (config_.llm_provider == "fixture") {
            if (config_.llm_fixtures_path.empty())
                throw InputError("fixture LLM provider needs llm.fixtures in the config");
            llm_ = std::make_unique<FixtureLlmProvider>(config_.llm_fixtures_path);
        } else if (config_.llm_provider == "remote") {
            if (config_.llm_base_url.empty())
                throw InputError("remote LLM provider needs llm.base_url (or RMD_LLM_BASE_URL)");
            llm_ = std::make_unique<RemoteLlmProvider>(config_.llm_base_url, config_.llm_model,
                                                       config_.agent.max_retries);
        } else {
            throw InputError("unknown llm provider \"" + config_.llm_provider + "\"");
        }
    }
    return *llm_;
}

EmbeddingProvider& Engine::embedder() {
    if (!embedder_) {
        if (config_.embed_provider == "stub") {
            embedder_ = std::make_unique<StubEmbeddingProvider>(config_.embedding_dim);
        } else if (config_.embed_provider == "table") {
            if (config_.embed_table_path.empty())
                throw InputError("table embedding provider needs embedding.table in the config");
            embedder_ = std::make_unique<TableEmbeddingProvider>(config_.embed_table_path);
        } else if (config_.embed_provider == "remote") {
            if (config_.embed_base_url.empty())
                throw InputError("remote embedding provider needs embedding.base_url");
            embedder_ = std::make_unique<RemoteEmbeddingProvider>(
                config_.embed_base_url, config_.embed_model, config_.embedding_dim);
        } else {
            throw InputError("unknown embedding provider \"" + config_.embed_provider + "\"");
        }
    }
    return *embedder_;
}

const PromptTemplates& Engine::templates() {
    if (!templates_)
        templates_ = std::make_unique<PromptTemplates>(PromptTemplates::load(config_.prompts_dir));
    return *templates_;
}

const SkeletonDef& Engine::skeleton() {
    if (!skeleton_)
        skeleton_ = std::make_unique<SkeletonDef>(load_skeleton(config_.skeleton_path));
    return *skeleton_;
}

const BodyPartConfig& Engine::body_parts() {
    if (!body_parts_) {
        if (config_.masks_path.empty())
            body_parts_ = std::make_unique<BodyPartConfig>(BodyPartConfig::defaults_for_22());
        else
            body_parts_ = std::make_unique<BodyPartConfig>(
                BodyPartConfig::load(config_.masks_path, skeleton().joint_count()));
    }
    return *body_parts_;
}

ScoreModel& Engine::score_model() {
    if (!score_model_) {
        if (config_.score_model_path.empty())
            score_model_ = std::make_unique<ZeroScoreModel>();
        else
            score_model_ = load_score_model(config_.score_model_path, config_.schedule);
    }
    return *score_model_;
}

MotionDatabase& Engine::db() {
    if (!db_) {
        if (config_.index_path.empty())
            throw InputError("no index configured (set \"index\" in the config or run db build)");
        db_ = std::make_unique<MotionDatabase>(MotionDatabase::load(config_.index_path));
    }
    return *db_;
}

void Engine::set_db(MotionDatabase db) { db_ = std::make_unique<MotionDatabase>(std::move(db)); }

int run_db_build(Engine& engine, const std::string& motion_dir, const std::string& annotations,
                 const std::string& out_path) {
    const EngineConfig& c = engine.config();

    std::unique_ptr<MotionDatabase> cache;
    if (std::filesystem::exists(out_path)) {
        try {
            cache = std::make_unique<MotionDatabase>(MotionDatabase::load(out_path));
        } catch (const std::exception&) {
            cache.reset();  // unreadable cache is just a cold build
        }
    }

    MotionDatabase db = ingest_corpus(motion_dir, annotations, engine.llm(), engine.templates(),
                                      c.agent, c.seed, cache.get());
    embed_all(db, engine.embedder());
    compute_feature_stats(db);
    db.save(out_path);
    int count = db.size();
    engine.set_db(std::move(db));
    return count;
}

json run_decompose(Engine& engine, const std::string& prompt) {
    const EngineConfig& c = engine.config();
    DecomposeKResult r = decompose_k(engine.llm(), engine.templates(), prompt, c.agent, c.seed);
    json sets = json::array();
    for (const DecompositionSet& set : r.sets) sets.push_back(set.to_json());
    return json{{"prompt", prompt}, {"sets", sets}, {"warnings", r.warnings}};
}

RetrievalPlan run_retrieve(Engine& engine, const std::string& prompt, int length,
                           std::vector<std::string>* warnings) {
    if (length < 2) throw InputError("target length must be at least 2 frames");
    const EngineConfig& c = engine.config();
    Query query{prompt, length, engine.embedder().embed(prompt)};
    return hierarchical_retrieve(engine.db(), query, engine.embedder(), engine.llm(),
                                 engine.templates(), c.retrieval, c.agent, c.seed, warnings);
}

MotionClip run_compose(Engine& engine, const RetrievalPlan& plan, int length) {
    if (length < 2) throw InputError("target length must be at least 2 frames");
    std::map<BodyPart, MotionClip> sources;
    for (const auto& [part, sel] : plan.selections) {
        const DatabaseEntry* entry = engine.db().find(sel.entry_id);
        if (!entry)
            throw InputError("plan references entry \"" + sel.entry_id +
                             "\" which is not in the index");
        MotionFile mf = load_motion(engine.db().resolve_motion_path(*entry));
        if (mf.skeleton.joint_count() != engine.skeleton().joint_count())
            throw InputError("entry \"" + sel.entry_id + "\" uses a " +
                             std::to_string(mf.skeleton.joint_count()) +
                             "-joint skeleton, engine skeleton has " +
                             std::to_string(engine.skeleton().joint_count()));
        sources[part] = std::move(mf.clip);
    }
    return compose_parts(sources, plan.level, length, engine.skeleton(), engine.body_parts());
}

PoseFeatureSequence run_refine(Engine& engine, const PoseFeatureSequence& features,
                               const std::string& condition) {
    const EngineConfig& c = engine.config();
    if (c.refine.t0 == 0.0) return features;  // exact pass-through

    // Score models are trained (and the Gaussian oracle is parameterized) in
    // z-scored units; scale in, refine, scale back out.
    const FeatureStats* stats = nullptr;
    if (!c.index_path.empty() || engine.has_db()) {
        const FeatureStats& s = engine.db().feature_stats;
        if (!s.mean.empty()) {
            if (static_cast<int>(s.mean.size()) != features.width)
                throw InputError("index feature stats have width " +
                                 std::to_string(s.mean.size()) + ", features have " +
                                 std::to_string(features.width));
            stats = &s;
        }
    }

    SdeditConfig sc = c.refine;
    sc.seed = derive_seed(c.seed, "sdedit");
    PoseFeatureSequence x = stats ? stats->normalize(features) : features;
    x = sdedit(x, sc, c.schedule, engine.score_model(), condition);
    return stats ? stats->denormalize(x) : x;
}

GenerateResult run_generate(Engine& engine, const std::string& prompt, int length, bool dry_run) {
    const EngineConfig& c = engine.config();
    GenerateResult res;
    res.plan = run_retrieve(engine, prompt, length, &res.warnings);

    res.sidecar = json{{"schema_version", 1},
                       {"prompt", prompt},
                       {"length", length},
                       {"seed", c.seed},
                       {"plan", res.plan.to_json()},
                       {"refine",
                        json{{"t0", quantize9(c.refine.t0)},
                             {"steps", c.refine.steps},
                             {"mode", to_string(c.refine.mode)},
                             {"seed", derive_seed(c.seed, "sdedit")},
                             {"sigma_min", quantize9(c.schedule.sigma_min)},
                             {"sigma_max", quantize9(c.schedule.sigma_max)}}},
                       {"embedding_provider", engine.db().provider_tag},
                       {"warnings", res.warnings}};
    if (dry_run) return res;

    MotionClip guided = run_compose(engine, res.plan, length);
    PoseFeatureSequence guided_features = to_pose_features(guided, engine.skeleton());
    res.features = run_refine(engine, guided_features, prompt);
    res.motion = from_pose_features(res.features, engine.skeleton(), guided.fps);
    return res;
}

MetricReport run_eval(const std::string& generated_path, const std::string& reference_path,
                      const MetricsConfig& config) {
    FeatureSet generated = FeatureSet::load(generated_path);
    if (reference_path.empty()) return evaluate(generated, nullptr, config);
    FeatureSet reference = FeatureSet::load(reference_path);
    return evaluate(generated, &reference, config);
}

}  // namespace rmd
