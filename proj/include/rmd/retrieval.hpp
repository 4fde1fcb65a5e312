#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rmd/agents.hpp"
#include "rmd/corpus.hpp"
#include "rmd/embedding.hpp"

namespace rmd {

struct RetrievalConfig {
    double lambda = 0.05;   // length-penalty weight
    double tau_full = 0.96; // full-body acceptance threshold
    double tau_half = 0.96; // half-body acceptance threshold (on the mean)
};

struct Query {
    std::string text;
    int length = 0;  // target frames
    EmbeddingVector embedding;
};

// Similarity of a database description to the query: cosine damped by the
// relative length gap, s = <f_i, f_p> * exp(-lambda * |l_i-l_p| / max(l_i, l_p)).
double similarity_score(const EmbeddingVector& f_i, const EmbeddingVector& f_p, int l_i, int l_p,
                        double lambda);

struct NaiveResult {
    std::string entry_id;
    std::string key;
    double score = 0.0;
};

// Exhaustive argmax of similarity_score over every entry's description of the
// given key. Ties break toward the ascending entry id.
NaiveResult naive_retrieve(const MotionDatabase& db, const EmbeddingVector& query_embedding,
                           int query_len, const std::string& key, double lambda);

// One part's outcome: the agent-selected entry plus both score readings —
// the max over all candidates (drives the level decision) and the selected
// candidate's own score.
struct Selection {
    std::string entry_id;
    std::string key;
    double score = 0.0;           // max over candidate scores
    double selected_score = 0.0;  // the chosen candidate's own score
    bool agent_fallback = false;
};

// Retrieve each query description naively, dedupe to distinct entries, and
// let the retrieval agent pick among the entries' own descriptions.
Selection retrieve_part_with_agent(const MotionDatabase& db, BodyPart part, RetrievalLevel level,
                                   const std::string& original_prompt,
                                   const std::vector<std::string>& descriptions, int query_len,
                                   EmbeddingProvider& embedder, LlmProvider& llm,
                                   const PromptTemplates& templates,
                                   const RetrievalConfig& config,
                                   const AgentConfig& agent_config, std::uint64_t seed_hint);

struct RetrievalPlan {
    RetrievalLevel level = RetrievalLevel::Full;
    std::map<BodyPart, Selection> selections;
    double s_full = 0.0;
    std::optional<double> s_half_mean;  // absent when the full level accepted

    json to_json() const;
    static RetrievalPlan from_json(const json& j);
};

// The pure decision rule behind the coarse-to-fine policy: full when s_full
// clears tau_full, else half when the mean of the two half-body scores clears
// tau_half, else fine. Raising any score never moves the choice to a finer
// level. Scores not yet computed are passed as -infinity.
RetrievalLevel select_level(double s_full, double s_upper, double s_lower,
                            const RetrievalConfig& config);

// The coarse-to-fine policy: accept the full-body match when s_full clears
// tau_full; otherwise decompose k times and accept the half-body pair when the
// mean of the two part scores clears tau_half; otherwise assemble all six
// fine-grained parts.
RetrievalPlan hierarchical_retrieve(const MotionDatabase& db, const Query& query,
                                    EmbeddingProvider& embedder, LlmProvider& llm,
                                    const PromptTemplates& templates,
                                    const RetrievalConfig& config,
                                    const AgentConfig& agent_config, std::uint64_t base_seed,
                                    std::vector<std::string>* warnings = nullptr);

}  // namespace rmd
