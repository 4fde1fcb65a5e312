#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rmd/agents.hpp"
#include "rmd/body_parts.hpp"
#include "rmd/embedding.hpp"
#include "rmd/pose_features.hpp"

namespace rmd {

// Stable keys for the nine descriptions an entry carries: "full",
// "half/upper", "half/lower" and "fine/<part>".
std::string description_key(RetrievalLevel level, BodyPart part);
const std::vector<std::string>& all_description_keys();

// One motion with its annotation texts, cached decomposition and per-key
// text embeddings.
struct DatabaseEntry {
    std::string id;
    std::string motion_path;  // relative to the database's motion_root
    int length = 0;           // frames
    double fps = 20.0;
    std::vector<std::string> texts_full;
    DecompositionSet decomposition;
    std::map<std::string, EmbeddingVector> embeddings;

    // The text behind a description key. Multiple annotation prompts are
    // newline-joined for the "full" key, mirroring the decomposition input.
    std::string description_text(const std::string& key) const;

    json to_json() const;
    static DatabaseEntry from_json(const json& j);
};

// The retrieval database. Immutable once loaded; JSONL on disk with a header
// line followed by one entry per line.
struct MotionDatabase {
    std::vector<DatabaseEntry> entries;
    int embedding_dim = 0;      // 0 until embedded
    std::string provider_tag;   // empty until embedded
    std::string motion_root;    // directory motion_path values resolve against
    FeatureStats feature_stats; // per-channel z-score stats over the corpus

    int size() const { return static_cast<int>(entries.size()); }
    const DatabaseEntry* find(const std::string& id) const;
    std::string resolve_motion_path(const DatabaseEntry& entry) const;

    void save(const std::string& path) const;  // requires fully embedded
    static MotionDatabase load(const std::string& path);
};

// Read the annotations file (JSONL: {"id", "motion", "texts": [..]}), load
// each motion for length/fps, and decompose every entry's concatenated text
// once with the cached-sample policy. Embeddings are filled by embed_all.
// When a cache database is given, entries whose id, motion path and texts are
// unchanged reuse the cached decomposition and embeddings without any
// provider call.
MotionDatabase ingest_corpus(const std::string& motion_dir, const std::string& annotations_path,
                             LlmProvider& llm, const PromptTemplates& templates,
                             const AgentConfig& agent_config, std::uint64_t base_seed,
                             const MotionDatabase* cache = nullptr);

// Embed every description of every entry. Entries that already carry a vector
// for a key are skipped, so re-running on a warm database makes no provider
// calls. A provider different from the cached one wipes the stale vectors and
// re-embeds everything.
void embed_all(MotionDatabase& db, EmbeddingProvider& provider);

// Load every motion, convert to pose features and accumulate the per-channel
// mean/std that diffusion normalizes against. Stored in the index header.
void compute_feature_stats(MotionDatabase& db);

}  // namespace rmd
