#include "rmd/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmd/errors.hpp"
#include "rmd/kernels.hpp"
#include "rmd/rng.hpp"

namespace rmd {

double similarity_score(const EmbeddingVector& f_i, const EmbeddingVector& f_p, int l_i, int l_p,
                        double lambda) {
    if (l_i < 1 || l_p < 1) throw std::invalid_argument("lengths must be >= 1 frames");
    double gamma = std::abs(l_i - l_p) / static_cast<double>(std::max(l_i, l_p));
    return cosine(f_i, f_p) * std::exp(-lambda * gamma);
}

NaiveResult naive_retrieve(const MotionDatabase& db, const EmbeddingVector& query_embedding,
                           int query_len, const std::string& key, double lambda) {
    if (db.entries.empty()) throw InputError("cannot retrieve from an empty database");
    if (query_len < 1) throw std::invalid_argument("query length must be >= 1 frames");

    const int n = db.size();
    std::vector<const double*> vecs(n);
    for (int i = 0; i < n; ++i) {
        const auto& emb = db.entries[i].embeddings;
        auto it = emb.find(key);
        if (it == emb.end())
            throw InputError("entry \"" + db.entries[i].id + "\" has no embedding for \"" + key +
                             "\"");
        if (it->second.dim() != query_embedding.dim())
            throw std::invalid_argument("embedding dimension mismatch for key \"" + key + "\"");
        vecs[i] = it->second.values.data();
    }

    std::vector<double> scores(n);
    kernels::batched_dot(vecs.data(), n, query_embedding.dim(), query_embedding.values.data(),
                         scores.data());
    for (int i = 0; i < n; ++i) {
        int l_i = db.entries[i].length;
        double gamma = std::abs(l_i - query_len) / static_cast<double>(std::max(l_i, query_len));
        scores[i] *= std::exp(-lambda * gamma);
    }

    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (scores[i] > scores[best] ||
            (scores[i] == scores[best] && db.entries[i].id < db.entries[best].id))
            best = i;
    }
    return {db.entries[best].id, key, scores[best]};
}

Selection retrieve_part_with_agent(const MotionDatabase& db, BodyPart part, RetrievalLevel level,
                                   const std::string& original_prompt,
                                   const std::vector<std::string>& descriptions, int query_len,
                                   EmbeddingProvider& embedder, LlmProvider& llm,
                                   const PromptTemplates& templates,
                                   const RetrievalConfig& config,
                                   const AgentConfig& agent_config, std::uint64_t seed_hint) {
    if (descriptions.empty())
        throw std::invalid_argument("need at least one description to retrieve");
    const std::string key = description_key(level, part);

    // Identical sampled descriptions retrieve identically; embed each distinct
    // text once, in first-seen order.
    std::vector<std::string> distinct;
    for (const std::string& d : descriptions)
        if (std::find(distinct.begin(), distinct.end(), d) == distinct.end())
            distinct.push_back(d);

    // One naive retrieval per description, then dedupe by entry, keeping the
    // best score and first-seen position per entry.
    struct Candidate {
        std::string entry_id;
        std::string text;  // the database entry's own description
        double score;
    };
    std::vector<Candidate> candidates;
    for (const std::string& d : distinct) {
        NaiveResult hit = naive_retrieve(db, embedder.embed(d), query_len, key, config.lambda);
        auto it = std::find_if(candidates.begin(), candidates.end(),
                               [&](const Candidate& c) { return c.entry_id == hit.entry_id; });
        if (it == candidates.end()) {
            const DatabaseEntry* entry = db.find(hit.entry_id);
            candidates.push_back({hit.entry_id, entry->description_text(key), hit.score});
        } else {
            it->score = std::max(it->score, hit.score);
        }
    }

    std::vector<std::pair<std::string, double>> agent_input;
    agent_input.reserve(candidates.size());
    for (const Candidate& c : candidates) agent_input.emplace_back(c.text, c.score);
    SelectionResult picked = select_candidate(llm, templates, part, original_prompt, agent_input,
                                              agent_config, seed_hint);

    double best_score = candidates[0].score;
    for (const Candidate& c : candidates) best_score = std::max(best_score, c.score);

    Selection sel;
    sel.entry_id = candidates[picked.index].entry_id;
    sel.key = key;
    sel.score = best_score;
    sel.selected_score = candidates[picked.index].score;
    sel.agent_fallback = picked.used_fallback;
    return sel;
}

json RetrievalPlan::to_json() const {
    json sel = json::object();
    for (const auto& [part, s] : selections) {
        sel[to_string(part)] = json{{"entry", s.entry_id},
                                    {"key", s.key},
                                    {"score", quantize9(s.score)},
                                    {"selected_score", quantize9(s.selected_score)},
                                    {"agent_fallback", s.agent_fallback}};
    }
    json decided;
    decided["s_full"] = quantize9(s_full);
    if (s_half_mean)
        decided["s_half_mean"] = quantize9(*s_half_mean);
    else
        decided["s_half_mean"] = nullptr;
    return json{{"level", to_string(level)}, {"decided_scores", decided}, {"selections", sel}};
}

RetrievalPlan RetrievalPlan::from_json(const json& j) {
    RetrievalPlan plan;
    plan.level = level_from_string(j.at("level").get<std::string>());
    const json& decided = j.at("decided_scores");
    plan.s_full = decided.at("s_full").get<double>();
    if (!decided.at("s_half_mean").is_null())
        plan.s_half_mean = decided.at("s_half_mean").get<double>();
    for (const auto& [name, node] : j.at("selections").items()) {
        Selection s;
        s.entry_id = node.at("entry").get<std::string>();
        s.key = node.at("key").get<std::string>();
        s.score = node.at("score").get<double>();
        s.selected_score = node.at("selected_score").get<double>();
        s.agent_fallback = node.at("agent_fallback").get<bool>();
        plan.selections[body_part_from_string(name)] = std::move(s);
    }
    return plan;
}

RetrievalLevel select_level(double s_full, double s_upper, double s_lower,
                            const RetrievalConfig& config) {
    if (s_full >= config.tau_full) return RetrievalLevel::Full;
    if (0.5 * (s_upper + s_lower) >= config.tau_half) return RetrievalLevel::Half;
    return RetrievalLevel::Fine;
}

RetrievalPlan hierarchical_retrieve(const MotionDatabase& db, const Query& query,
                                    EmbeddingProvider& embedder, LlmProvider& llm,
                                    const PromptTemplates& templates,
                                    const RetrievalConfig& config,
                                    const AgentConfig& agent_config, std::uint64_t base_seed,
                                    std::vector<std::string>* warnings) {
    if (query.length < 1) throw std::invalid_argument("query length must be >= 1 frames");

    RetrievalPlan plan;

    // Full-body pass uses the raw prompt: one description, so the agent
    // short-circuits and this reduces to a naive scan.
    Selection full = retrieve_part_with_agent(
        db, BodyPart::Full, RetrievalLevel::Full, query.text, {query.text}, query.length,
        embedder, llm, templates, config, agent_config, derive_seed(base_seed, "select/full"));
    plan.s_full = full.score;
    constexpr double kUnknown = std::numeric_limits<double>::lowest();
    if (select_level(full.score, kUnknown, kUnknown, config) == RetrievalLevel::Full) {
        plan.level = RetrievalLevel::Full;
        plan.selections[BodyPart::Full] = full;
        return plan;
    }

    DecomposeKResult decomposed =
        decompose_k(llm, templates, query.text, agent_config, base_seed);
    if (warnings)
        warnings->insert(warnings->end(), decomposed.warnings.begin(),
                         decomposed.warnings.end());

    auto part_descriptions = [&](BodyPart part, RetrievalLevel level) {
        std::vector<std::string> out;
        out.reserve(decomposed.sets.size());
        for (const DecompositionSet& set : decomposed.sets)
            out.push_back(set.part_text(part, level));
        return out;
    };
    auto retrieve_part = [&](BodyPart part, RetrievalLevel level) {
        const std::string key = description_key(level, part);
        return retrieve_part_with_agent(db, part, level, query.text,
                                        part_descriptions(part, level), query.length, embedder,
                                        llm, templates, config, agent_config,
                                        derive_seed(base_seed, "select/" + key));
    };

    Selection upper = retrieve_part(BodyPart::UpperBody, RetrievalLevel::Half);
    Selection lower = retrieve_part(BodyPart::LowerBody, RetrievalLevel::Half);
    plan.s_half_mean = 0.5 * (upper.score + lower.score);
    if (select_level(plan.s_full, upper.score, lower.score, config) == RetrievalLevel::Half) {
        plan.level = RetrievalLevel::Half;
        plan.selections[BodyPart::UpperBody] = upper;
        plan.selections[BodyPart::LowerBody] = lower;
        return plan;
    }

    plan.level = RetrievalLevel::Fine;
    for (BodyPart part : {BodyPart::Head, BodyPart::Torso, BodyPart::LeftArm, BodyPart::RightArm,
                          BodyPart::LowerBody, BodyPart::Trajectory})
        plan.selections[part] = retrieve_part(part, RetrievalLevel::Fine);
    return plan;
}

}  // namespace rmd
