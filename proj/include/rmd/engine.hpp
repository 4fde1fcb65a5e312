#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rmd/agents.hpp"
#include "rmd/body_parts.hpp"
#include "rmd/corpus.hpp"
#include "rmd/diffusion.hpp"
#include "rmd/metrics.hpp"
#include "rmd/retrieval.hpp"

namespace rmd {

// Everything a run needs, resolved in precedence order
// CLI flag > environment > config file > default.
struct EngineConfig {
    std::string index_path;
    std::string skeleton_path = "data/skeleton_22.json";
    std::string masks_path;  // empty -> built-in 22-joint masks
    std::string prompts_dir = "data/prompts";
    std::string score_model_path;  // empty -> zero score model

    std::string llm_provider = "fixture";  // fixture | remote
    std::string llm_fixtures_path;
    std::string llm_base_url;
    std::string llm_model;

    std::string embed_provider = "stub";  // stub | table | remote
    int embedding_dim = 512;
    std::string embed_table_path;
    std::string embed_base_url;
    std::string embed_model;

    RetrievalConfig retrieval;
    AgentConfig agent;
    SdeditConfig refine;
    NoiseSchedule schedule;
    std::uint64_t seed = 0;

    static EngineConfig load(const std::string& path);  // applies env overrides
    static EngineConfig from_json(const json& j);
    void apply_env();
};

// Owns the providers, templates, skeleton, masks and (lazily) the database.
class Engine {
public:
    explicit Engine(EngineConfig config);

    const EngineConfig& config() const { return config_; }
    EngineConfig& config() { return config_; }

    LlmProvider& llm();
    EmbeddingProvider& embedder();
    const PromptTemplates& templates();
    const SkeletonDef& skeleton();
    const BodyPartConfig& body_parts();
    ScoreModel& score_model();
    MotionDatabase& db();
    bool has_db() const { return db_ != nullptr; }
    void set_db(MotionDatabase db);  // for in-process pipelines and tests

private:
    EngineConfig config_;
    std::unique_ptr<LlmProvider> llm_;
    std::unique_ptr<EmbeddingProvider> embedder_;
    std::unique_ptr<PromptTemplates> templates_;
    std::unique_ptr<SkeletonDef> skeleton_;
    std::unique_ptr<BodyPartConfig> body_parts_;
    std::unique_ptr<ScoreModel> score_model_;
    std::unique_ptr<MotionDatabase> db_;
};

// Build (or refresh) the index: ingest + decompose, embed, feature stats,
// save. An existing index at out_path acts as a cache, so unchanged entries
// trigger no provider calls. Returns the entry count.
int run_db_build(Engine& engine, const std::string& motion_dir, const std::string& annotations,
                 const std::string& out_path);

// k decomposition samples of one prompt, as printable JSON.
json run_decompose(Engine& engine, const std::string& prompt);

RetrievalPlan run_retrieve(Engine& engine, const std::string& prompt, int length,
                           std::vector<std::string>* warnings = nullptr);

// Assemble the guided motion a plan describes, resampled to target length.
MotionClip run_compose(Engine& engine, const RetrievalPlan& plan, int length);

// Refine a feature sequence: z-score with the database stats, run the
// reverse steps, undo the scaling. t0 = 0 passes features through untouched.
PoseFeatureSequence run_refine(Engine& engine, const PoseFeatureSequence& features,
                               const std::string& condition);

struct GenerateResult {
    RetrievalPlan plan;
    MotionClip motion;
    PoseFeatureSequence features;  // refined, in raw (denormalized) units
    std::vector<std::string> warnings;
    json sidecar;  // prompt, length, seeds, plan — the run's provenance record
};

// The full pipeline: retrieve -> compose -> features -> refine -> decode.
// dry_run stops after the plan.
GenerateResult run_generate(Engine& engine, const std::string& prompt, int length, bool dry_run);

MetricReport run_eval(const std::string& generated_path, const std::string& reference_path,
                      const MetricsConfig& config);

}  // namespace rmd
