#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rmd/body_parts.hpp"
#include "rmd/json_io.hpp"

namespace rmd {

// Chat backend abstraction. The fixture implementation is a pure function of
// (prompt, seed hint), which makes the whole agent layer deterministic.
class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const std::string& prompt, double temperature,
                                 std::uint64_t seed_hint) = 0;
};

// Canned replies keyed by "<fnv1a64(prompt) as hex>#<seed>"; a "#*" suffix
// matches any seed. Counts calls so tests can assert cache behavior.
class FixtureLlmProvider : public LlmProvider {
public:
    explicit FixtureLlmProvider(const std::string& path);
    explicit FixtureLlmProvider(const json& replies);

    std::string complete(const std::string& prompt, double temperature,
                         std::uint64_t seed_hint) override;

    static std::string key_for(const std::string& prompt, std::uint64_t seed_hint);
    static std::string wildcard_key(const std::string& prompt);

    int call_count() const { return call_count_; }

private:
    std::map<std::string, std::string> replies_;
    int call_count_ = 0;
};

// OpenAI-style /v1/chat/completions endpoint. Reads RMD_LLM_API_KEY.
class RemoteLlmProvider : public LlmProvider {
public:
    RemoteLlmProvider(std::string base_url, std::string model, int max_retries = 2);
    std::string complete(const std::string& prompt, double temperature,
                         std::uint64_t seed_hint) override;

private:
    std::string base_url_;
    std::string model_;
    int max_retries_;
};

// Prompt texts live in versioned resource files with [description], [part],
// [retrieved motion prompts] and [original motion prompt] slots.
struct PromptTemplates {
    std::string half_template;
    std::string fine_template;
    std::string retrieval_template;

    static PromptTemplates load(const std::string& dir);

    std::string render_half(const std::string& description) const;
    std::string render_fine(const std::string& description) const;
    std::string render_retrieval(const std::vector<std::string>& candidates, BodyPart part,
                                 const std::string& original_prompt) const;
};

// One decomposition sample: upper/lower half-body texts plus the six
// fine-grained part texts.
struct DecompositionSet {
    std::string upper;
    std::string lower;
    std::map<BodyPart, std::string> fine;

    const std::string& part_text(BodyPart part, RetrievalLevel level) const;
    void validate() const;

    json to_json() const;
    static DecompositionSet from_json(const json& j);
};

struct AgentConfig {
    int k = 5;                 // decomposition samples per query
    double temperature = 0.7;  // sampling temperature for decomposition
    int max_retries = 2;       // identical-prompt resends on shape violations
};

std::pair<std::string, std::string> decompose_half(LlmProvider& provider,
                                                   const PromptTemplates& templates,
                                                   const std::string& text,
                                                   const AgentConfig& config,
                                                   std::uint64_t seed_hint);

std::map<BodyPart, std::string> decompose_fine(LlmProvider& provider,
                                               const PromptTemplates& templates,
                                               const std::string& text,
                                               const AgentConfig& config,
                                               std::uint64_t seed_hint);

// Half + fine decomposition with a shared seed hint.
DecompositionSet decompose_set(LlmProvider& provider, const PromptTemplates& templates,
                               const std::string& text, const AgentConfig& config,
                               std::uint64_t seed_hint);

struct DecomposeKResult {
    std::vector<DecompositionSet> sets;
    std::vector<std::string> warnings;  // per-sample failures that were tolerated
};

// k independent samples with distinct seed hints. Individual failures are
// tolerated as long as at least one set survives.
DecomposeKResult decompose_k(LlmProvider& provider, const PromptTemplates& templates,
                             const std::string& text, const AgentConfig& config,
                             std::uint64_t base_seed);

struct SelectionResult {
    int index = 0;           // 0-based position in the candidate list
    bool used_fallback = false;  // argmax-score fallback after unparseable replies
};

// Ask the retrieval agent which candidate description best matches the
// original prompt. Candidates are (description, score); a single candidate
// short-circuits without any provider call.
SelectionResult select_candidate(LlmProvider& provider, const PromptTemplates& templates,
                                 BodyPart part, const std::string& original_prompt,
                                 const std::vector<std::pair<std::string, double>>& candidates,
                                 const AgentConfig& config, std::uint64_t seed_hint);

}  // namespace rmd
