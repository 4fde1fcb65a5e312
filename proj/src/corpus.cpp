#include "rmd/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "rmd/errors.hpp"
#include "rmd/motion.hpp"
#include "rmd/rng.hpp"

namespace rmd {

namespace {

constexpr int kIndexSchemaVersion = 1;

std::string join_lines(const std::vector<std::string>& texts) {
    std::string out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (i > 0) out += "\n";
        out += texts[i];
    }
    return out;
}

}  // namespace

std::string description_key(RetrievalLevel level, BodyPart part) {
    switch (level) {
        case RetrievalLevel::Full:
            return "full";
        case RetrievalLevel::Half:
            if (part == BodyPart::UpperBody) return "half/upper";
            if (part == BodyPart::LowerBody) return "half/lower";
            throw std::invalid_argument("half level has no key for part " + to_string(part));
        case RetrievalLevel::Fine:
            return "fine/" + to_string(part);
    }
    throw std::invalid_argument("unknown retrieval level");
}

const std::vector<std::string>& all_description_keys() {
    static const std::vector<std::string> keys = {
        "full",          "half/upper",     "half/lower",
        "fine/head",     "fine/torso",     "fine/left_arm",
        "fine/right_arm", "fine/lower_body", "fine/trajectory",
    };
    return keys;
}

std::string DatabaseEntry::description_text(const std::string& key) const {
    if (key == "full") return join_lines(texts_full);
    if (key == "half/upper") return decomposition.upper;
    if (key == "half/lower") return decomposition.lower;
    const std::string fine_prefix = "fine/";
    if (key.rfind(fine_prefix, 0) == 0) {
        BodyPart part = body_part_from_string(key.substr(fine_prefix.size()));
        return decomposition.part_text(part, RetrievalLevel::Fine);
    }
    throw std::invalid_argument("unknown description key: " + key);
}

json DatabaseEntry::to_json() const {
    json j;
    j["id"] = id;
    j["motion"] = motion_path;
    j["length"] = length;
    j["fps"] = quantize9(fps);
    j["texts_full"] = texts_full;
    j["decomposition"] = decomposition.to_json();
    json emb = json::object();
    for (const std::string& key : all_description_keys()) {
        auto it = embeddings.find(key);
        if (it != embeddings.end()) emb[key] = quantized_array(it->second.values);
    }
    j["embeddings"] = emb;
    return j;
}

DatabaseEntry DatabaseEntry::from_json(const json& j) {
    DatabaseEntry entry;
    entry.id = j.at("id").get<std::string>();
    entry.motion_path = j.at("motion").get<std::string>();
    entry.length = j.at("length").get<int>();
    entry.fps = j.at("fps").get<double>();
    entry.texts_full = j.at("texts_full").get<std::vector<std::string>>();
    entry.decomposition = DecompositionSet::from_json(j.at("decomposition"));
    for (const auto& [key, values] : j.at("embeddings").items()) {
        EmbeddingVector e;
        e.values = values.get<std::vector<double>>();
        entry.embeddings[key] = std::move(e);
    }
    if (entry.length < 1)
        throw std::invalid_argument("entry \"" + entry.id + "\" has length < 1");
    return entry;
}

const DatabaseEntry* MotionDatabase::find(const std::string& id) const {
    for (const DatabaseEntry& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

std::string MotionDatabase::resolve_motion_path(const DatabaseEntry& entry) const {
    if (motion_root.empty() || entry.motion_path.front() == '/') return entry.motion_path;
    return motion_root + "/" + entry.motion_path;
}

void MotionDatabase::save(const std::string& path) const {
    if (embedding_dim <= 0 || provider_tag.empty())
        throw std::invalid_argument("refusing to save an un-embedded database");
    for (const DatabaseEntry& entry : entries)
        for (const std::string& key : all_description_keys())
            if (!entry.embeddings.count(key))
                throw std::invalid_argument("entry \"" + entry.id + "\" is missing embedding \"" +
                                            key + "\"");

    json header;
    header["schema_version"] = kIndexSchemaVersion;
    header["embedding_dim"] = embedding_dim;
    header["provider_tag"] = provider_tag;
    header["count"] = size();
    header["motion_root"] = motion_root;
    header["feature_mean"] = quantized_array(feature_stats.mean);
    header["feature_std"] = quantized_array(feature_stats.std_dev);

    std::string out = header.dump() + "\n";
    for (const DatabaseEntry& entry : entries) out += entry.to_json().dump() + "\n";
    write_text_file(path, out);
}

MotionDatabase MotionDatabase::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open database index: " + path);

    MotionDatabase db;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    std::set<std::string> seen_ids;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
        }
        try {
            if (!saw_header) {
                int version = record.at("schema_version").get<int>();
                if (version != kIndexSchemaVersion)
                    throw InputError(path + ": unsupported schema_version " +
                                     std::to_string(version) + " (expected " +
                                     std::to_string(kIndexSchemaVersion) + ")");
                db.embedding_dim = record.at("embedding_dim").get<int>();
                db.provider_tag = record.at("provider_tag").get<std::string>();
                db.motion_root = record.at("motion_root").get<std::string>();
                db.feature_stats.mean = record.at("feature_mean").get<std::vector<double>>();
                db.feature_stats.std_dev = record.at("feature_std").get<std::vector<double>>();
                db.entries.reserve(record.at("count").get<std::size_t>());
                saw_header = true;
                continue;
            }
            DatabaseEntry entry = DatabaseEntry::from_json(record);
            if (!seen_ids.insert(entry.id).second)
                throw InputError(path + ": duplicate entry id \"" + entry.id + "\"");
            for (const std::string& key : all_description_keys()) {
                auto it = entry.embeddings.find(key);
                if (it == entry.embeddings.end())
                    throw InputError(path + ": entry \"" + entry.id +
                                     "\" is missing embedding \"" + key + "\"");
                if (it->second.dim() != db.embedding_dim)
                    throw InputError(path + ": entry \"" + entry.id + "\" embedding \"" + key +
                                     "\" has dimension " + std::to_string(it->second.dim()) +
                                     ", header says " + std::to_string(db.embedding_dim));
                it->second.provider_tag = db.provider_tag;
            }
            db.entries.push_back(std::move(entry));
        } catch (const json::exception& e) {
            throw ParseError(path, line_no, std::string("bad record: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, line_no, e.what());
        }
    }
    if (!saw_header) throw InputError(path + ": empty index file (missing header line)");
    return db;
}

MotionDatabase ingest_corpus(const std::string& motion_dir, const std::string& annotations_path,
                             LlmProvider& llm, const PromptTemplates& templates,
                             const AgentConfig& agent_config, std::uint64_t base_seed,
                             const MotionDatabase* cache) {
    std::ifstream in(annotations_path);
    if (!in) throw InputError("cannot open annotations file: " + annotations_path);

    MotionDatabase db;
    db.motion_root = motion_dir;

    std::string line;
    int line_no = 0;
    std::set<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(annotations_path, line_no, std::string("invalid JSON: ") + e.what());
        }

        DatabaseEntry entry;
        try {
            entry.id = record.at("id").get<std::string>();
            entry.motion_path = record.at("motion").get<std::string>();
            entry.texts_full = record.at("texts").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw ParseError(annotations_path, line_no, std::string("bad record: ") + e.what());
        }
        if (entry.texts_full.empty())
            throw ParseError(annotations_path, line_no,
                             "entry \"" + entry.id + "\" has no texts");
        if (!seen_ids.insert(entry.id).second)
            throw InputError(annotations_path + ": duplicate entry id \"" + entry.id + "\"");

        MotionFile motion = load_motion(db.resolve_motion_path(entry));
        entry.length = motion.clip.length();
        entry.fps = motion.clip.fps;

        const DatabaseEntry* cached = cache ? cache->find(entry.id) : nullptr;
        if (cached && cached->motion_path == entry.motion_path &&
            cached->texts_full == entry.texts_full) {
            entry.decomposition = cached->decomposition;
            entry.embeddings = cached->embeddings;
        } else {
            // One cached decomposition per database entry; the query side is
            // the place where k-sampling buys diversity.
            std::uint64_t seed = derive_seed(base_seed, "db/" + entry.id);
            entry.decomposition = decompose_set(llm, templates, join_lines(entry.texts_full),
                                                agent_config, seed);
        }
        db.entries.push_back(std::move(entry));
    }
    if (cache) {
        db.embedding_dim = cache->embedding_dim;
        db.provider_tag = cache->provider_tag;
    }
    return db;
}

void embed_all(MotionDatabase& db, EmbeddingProvider& provider) {
    if (!db.provider_tag.empty() && db.provider_tag != provider.tag()) {
        // Vectors from a different provider are not comparable; start over.
        for (DatabaseEntry& entry : db.entries) entry.embeddings.clear();
    }
    db.embedding_dim = provider.dim();
    db.provider_tag = provider.tag();
    for (DatabaseEntry& entry : db.entries) {
        for (const std::string& key : all_description_keys()) {
            if (entry.embeddings.count(key)) continue;  // warm cache
            try {
                entry.embeddings[key] = provider.embed(entry.description_text(key));
            } catch (const ProviderError& e) {
                throw ProviderError("embedding \"" + entry.id + "/" + key + "\": " + e.what());
            }
        }
    }
}

void compute_feature_stats(MotionDatabase& db) {
    FeatureStatsAccumulator acc;
    for (const DatabaseEntry& entry : db.entries) {
        MotionFile motion = load_motion(db.resolve_motion_path(entry));
        acc.add(to_pose_features(motion.clip, motion.skeleton));
    }
    db.feature_stats = acc.finalize();
}

}  // namespace rmd
