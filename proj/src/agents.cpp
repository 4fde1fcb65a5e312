#include "rmd/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "rmd/errors.hpp"
#include "rmd/rng.hpp"

namespace rmd {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// "3. text" / "3) text" -> "text"
std::string strip_enumeration(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i >= line.size()) return line;
    if (line[i] != '.' && line[i] != ')') return line;
    return trim(line.substr(i + 1));
}

// The prompts forbid labels, but models sometimes emit them anyway.
std::string strip_label(const std::string& line) {
    static const char* kLabels[] = {
        "upper body motion", "lower body motion", "upper body",       "lower body",
        "head",              "spine",             "torso",            "left upper limb",
        "right upper limb",  "left lower limb",   "right lower limb", "left arm",
        "right arm",         "lower limbs",       "legs",             "overall trajectory",
        "overall displacement/orientation",       "overall displacement", "trajectory",
    };
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) return line;
    std::string prefix = lower(trim(line.substr(0, colon)));
    for (const char* label : kLabels) {
        if (prefix == label) {
            std::string rest = trim(line.substr(colon + 1));
            return rest.empty() ? line : rest;
        }
    }
    return line;
}

std::vector<std::string> parse_reply_lines(const std::string& reply) {
    std::vector<std::string> lines;
    std::istringstream in(reply);
    std::string raw;
    while (std::getline(in, raw)) {
        std::string line = trim(raw);
        if (line.empty()) continue;
        lines.push_back(strip_label(strip_enumeration(line)));
    }
    return lines;
}

// Ask for a reply with an exact line count, resending the identical prompt on
// shape violations up to max_retries times.
std::vector<std::string> complete_with_shape(LlmProvider& provider, const std::string& prompt,
                                             double temperature, std::uint64_t seed_hint,
                                             std::size_t expected_lines, int max_retries) {
    std::string last_reply;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        last_reply = provider.complete(prompt, temperature, seed_hint);
        std::vector<std::string> lines = parse_reply_lines(last_reply);
        if (lines.size() == expected_lines) return lines;
    }
    throw DecompositionError("expected " + std::to_string(expected_lines) +
                                 " reply lines, got " +
                                 std::to_string(parse_reply_lines(last_reply).size()) + " after " +
                                 std::to_string(max_retries + 1) + " attempts",
                             last_reply);
}

std::string replace_all(std::string text, const std::string& slot, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
    return text;
}

std::string load_template(const std::string& path) {
    std::string text = read_text_file(path);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

}  // namespace

FixtureLlmProvider::FixtureLlmProvider(const std::string& path)
    : FixtureLlmProvider(read_json_file(path)) {}

FixtureLlmProvider::FixtureLlmProvider(const json& replies) {
    const json& table = replies.contains("replies") ? replies.at("replies") : replies;
    if (!table.is_object()) throw InputError("fixture reply table must be a JSON object");
    for (const auto& [key, value] : table.items()) {
        if (!value.is_string()) throw InputError("fixture reply for \"" + key + "\" must be a string");
        replies_[key] = value.get<std::string>();
    }
}

std::string FixtureLlmProvider::key_for(const std::string& prompt, std::uint64_t seed_hint) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(prompt)));
    return std::string(buf) + "#" + std::to_string(seed_hint);
}

std::string FixtureLlmProvider::wildcard_key(const std::string& prompt) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(prompt)));
    return std::string(buf) + "#*";
}

std::string FixtureLlmProvider::complete(const std::string& prompt, double /*temperature*/,
                                         std::uint64_t seed_hint) {
    ++call_count_;
    auto it = replies_.find(key_for(prompt, seed_hint));
    if (it == replies_.end()) it = replies_.find(wildcard_key(prompt));
    if (it == replies_.end())
        throw ProviderError("fixture has no reply for key " + key_for(prompt, seed_hint) +
                            " (prompt starts: \"" + prompt.substr(0, 60) + "\")");
    return it->second;
}

RemoteLlmProvider::RemoteLlmProvider(std::string base_url, std::string model, int max_retries)
    : base_url_(std::move(base_url)), model_(std::move(model)), max_retries_(max_retries) {}

std::string RemoteLlmProvider::complete(const std::string& prompt, double temperature,
                                        std::uint64_t seed_hint) {
    json body;
    body["model"] = model_;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = temperature;
    body["seed"] = seed_hint;

    httplib::Headers headers;
    if (const char* key = std::getenv("RMD_LLM_API_KEY"))
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        httplib::Client client(base_url_);
        client.set_read_timeout(120, 0);
        auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            continue;
        }
        try {
            json reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("bad reply: ") + e.what();
        }
    }
    throw ProviderError("chat request failed after " + std::to_string(max_retries_ + 1) +
                        " attempts: " + last_error);
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
    PromptTemplates t;
    t.half_template = load_template(dir + "/decompose_half.txt");
    t.fine_template = load_template(dir + "/decompose_fine.txt");
    t.retrieval_template = load_template(dir + "/retrieval_agent.txt");
    return t;
}

std::string PromptTemplates::render_half(const std::string& description) const {
    return replace_all(half_template, "[description]", description);
}

std::string PromptTemplates::render_fine(const std::string& description) const {
    return replace_all(fine_template, "[description]", description);
}

std::string PromptTemplates::render_retrieval(const std::vector<std::string>& candidates,
                                              BodyPart part,
                                              const std::string& original_prompt) const {
    std::string numbered;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i > 0) numbered += "\n";
        numbered += std::to_string(i + 1) + ". " + candidates[i];
    }
    std::string out = replace_all(retrieval_template, "[retrieved motion prompts]", numbered);
    out = replace_all(out, "[part]", prompt_name(part));
    return replace_all(out, "[original motion prompt]", original_prompt);
}

const std::string& DecompositionSet::part_text(BodyPart part, RetrievalLevel level) const {
    if (level == RetrievalLevel::Half) {
        if (part == BodyPart::UpperBody) return upper;
        if (part == BodyPart::LowerBody) return lower;
        throw std::invalid_argument("half level has only upper_body and lower_body texts");
    }
    if (level == RetrievalLevel::Fine) {
        auto it = fine.find(part);
        if (it == fine.end())
            throw std::invalid_argument("no fine text for part " + to_string(part));
        return it->second;
    }
    throw std::invalid_argument("full level has no per-part texts");
}

void DecompositionSet::validate() const {
    if (upper.empty() || lower.empty())
        throw std::invalid_argument("decomposition set is missing half-body texts");
    static const BodyPart kFine[] = {BodyPart::Head,     BodyPart::Torso,
                                     BodyPart::LeftArm,  BodyPart::RightArm,
                                     BodyPart::LowerBody, BodyPart::Trajectory};
    for (BodyPart part : kFine) {
        auto it = fine.find(part);
        if (it == fine.end() || it->second.empty())
            throw std::invalid_argument("decomposition set is missing fine text for " +
                                        to_string(part));
    }
}

json DecompositionSet::to_json() const {
    json f;
    for (const auto& [part, text] : fine) f[to_string(part)] = text;
    return json{{"upper", upper}, {"lower", lower}, {"fine", f}};
}

DecompositionSet DecompositionSet::from_json(const json& j) {
    DecompositionSet set;
    set.upper = j.at("upper").get<std::string>();
    set.lower = j.at("lower").get<std::string>();
    for (const auto& [name, text] : j.at("fine").items())
        set.fine[body_part_from_string(name)] = text.get<std::string>();
    set.validate();
    return set;
}

std::pair<std::string, std::string> decompose_half(LlmProvider& provider,
                                                   const PromptTemplates& templates,
                                                   const std::string& text,
                                                   const AgentConfig& config,
                                                   std::uint64_t seed_hint) {
    if (trim(text).empty()) throw std::invalid_argument("cannot decompose an empty description");
    std::vector<std::string> lines =
        complete_with_shape(provider, templates.render_half(text), config.temperature, seed_hint,
                            2, config.max_retries);
    return {lines[0], lines[1]};
}

std::map<BodyPart, std::string> decompose_fine(LlmProvider& provider,
                                               const PromptTemplates& templates,
                                               const std::string& text,
                                               const AgentConfig& config,
                                               std::uint64_t seed_hint) {
    if (trim(text).empty()) throw std::invalid_argument("cannot decompose an empty description");
    std::vector<std::string> lines =
        complete_with_shape(provider, templates.render_fine(text), config.temperature, seed_hint,
                            7, config.max_retries);
    // Reply order: head, spine, left upper limb, right upper limb, left lower
    // limb, right lower limb, trajectory. The two lower-limb lines merge into
    // the single lower_body part.
    std::map<BodyPart, std::string> fine;
    fine[BodyPart::Head] = lines[0];
    fine[BodyPart::Torso] = lines[1];
    fine[BodyPart::LeftArm] = lines[2];
    fine[BodyPart::RightArm] = lines[3];
    fine[BodyPart::LowerBody] = lines[4] + "; " + lines[5];
    fine[BodyPart::Trajectory] = lines[6];
    return fine;
}

DecompositionSet decompose_set(LlmProvider& provider, const PromptTemplates& templates,
                               const std::string& text, const AgentConfig& config,
                               std::uint64_t seed_hint) {
    DecompositionSet set;
    auto half = decompose_half(provider, templates, text, config, seed_hint);
    set.upper = half.first;
    set.lower = half.second;
    set.fine = decompose_fine(provider, templates, text, config, seed_hint);
    set.validate();
    return set;
}

DecomposeKResult decompose_k(LlmProvider& provider, const PromptTemplates& templates,
                             const std::string& text, const AgentConfig& config,
                             std::uint64_t base_seed) {
    if (config.k < 1) throw std::invalid_argument("decomposition sample count must be >= 1");
    DecomposeKResult result;
    std::string last_raw;
    for (int i = 0; i < config.k; ++i) {
        std::uint64_t seed = derive_seed(base_seed, "decompose", i);
        try {
            result.sets.push_back(decompose_set(provider, templates, text, config, seed));
        } catch (const DecompositionError& e) {
            result.warnings.push_back("decomposition sample " + std::to_string(i) +
                                      " discarded: " + e.what());
            last_raw = e.raw_reply();
        }
    }
    if (result.sets.empty()) {
        std::string causes;
        for (const std::string& w : result.warnings) causes += "\n  " + w;
        throw DecompositionError("all " + std::to_string(config.k) +
                                     " decomposition samples failed:" + causes,
                                 last_raw);
    }
    return result;
}

namespace {

// Pull a 1-based candidate index out of the reply's last non-empty line. The
// prompt asks for a bare number, but any trailing integer on that line counts.
bool parse_selection_index(const std::string& reply, std::size_t n_candidates, int* out) {
    std::vector<std::string> lines;
    std::istringstream in(reply);
    std::string raw;
    while (std::getline(in, raw)) {
        std::string line = trim(raw);
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) return false;
    const std::string& last = lines.back();

    long value = -1;
    bool found = false;
    for (std::size_t i = 0; i < last.size();) {
        if (std::isdigit(static_cast<unsigned char>(last[i]))) {
            std::size_t j = i;
            while (j < last.size() && std::isdigit(static_cast<unsigned char>(last[j]))) ++j;
            value = std::strtol(last.substr(i, j - i).c_str(), nullptr, 10);
            found = true;
            i = j;
        } else {
            ++i;
        }
    }
    if (!found || value < 1 || value > static_cast<long>(n_candidates)) return false;
    *out = static_cast<int>(value - 1);
    return true;
}

}  // namespace

SelectionResult select_candidate(LlmProvider& provider, const PromptTemplates& templates,
                                 BodyPart part, const std::string& original_prompt,
                                 const std::vector<std::pair<std::string, double>>& candidates,
                                 const AgentConfig& config, std::uint64_t seed_hint) {
    if (candidates.empty()) throw std::invalid_argument("cannot select from zero candidates");
    if (candidates.size() == 1) return {0, false};

    std::vector<std::string> descriptions;
    descriptions.reserve(candidates.size());
    for (const auto& [text, score] : candidates) descriptions.push_back(text);
    std::string prompt = templates.render_retrieval(descriptions, part, original_prompt);

    // Selection runs at temperature 0: there is one best answer.
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        std::string reply = provider.complete(prompt, 0.0, seed_hint);
        int index = 0;
        if (parse_selection_index(reply, candidates.size(), &index)) return {index, false};
    }

    // Unparseable after retries: fall back to the highest-scoring candidate.
    int best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].second > candidates[best].second) best = static_cast<int>(i);
    return {best, true};
}

}  // namespace rmd
