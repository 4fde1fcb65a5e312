#include "rmd/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "rmd/errors.hpp"
#include "rmd/json_io.hpp"
#include "rmd/rng.hpp"

namespace rmd {

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

void EmbeddingVector::normalize() {
    double n = norm();
    if (n == 0.0) throw std::invalid_argument("cannot normalize a zero embedding");
    for (double& v : values) v /= n;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("embedding dimension mismatch: " + std::to_string(a.dim()) +
                                    " vs " + std::to_string(b.dim()));
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
    return s;
}

StubEmbeddingProvider::StubEmbeddingProvider(int dim) : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("stub embedding dim must be >= 1");
}

std::string StubEmbeddingProvider::tag() const {
    return "stub-fnv1a-" + std::to_string(dim_);
}

EmbeddingVector StubEmbeddingProvider::embed(const std::string& text) {
    EmbeddingVector e;
    e.values.assign(dim_, 0.0);
    e.provider_tag = tag();

    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::uint64_t h = fnv1a64(token);
        e.values[h % static_cast<std::uint64_t>(dim_)] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    flush();

    if (e.norm() == 0.0) {
        // Whitespace-only input: a fixed basis direction keeps the contract
        // that every embedding is unit norm.
        e.values[0] = 1.0;
    }
    e.normalize();
    return e;
}

TableEmbeddingProvider::TableEmbeddingProvider(const std::string& path) {
    json j = read_json_file(path);
    try {
        dim_ = j.at("dim").get<int>();
        for (const auto& [text, vec] : j.at("vectors").items()) {
            auto values = vec.get<std::vector<double>>();
            if (static_cast<int>(values.size()) != dim_)
                throw InputError(path + ": vector for \"" + text + "\" has wrong dimension");
            vectors_[text] = std::move(values);
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": bad embedding table: " + e.what());
    }
    tag_ = "table:" + std::to_string(fnv1a64(path));
}

EmbeddingVector TableEmbeddingProvider::embed(const std::string& text) {
    auto it = vectors_.find(text);
    if (it == vectors_.end())
        throw ProviderError("embedding table has no entry for: \"" + text + "\"");
    EmbeddingVector e;
    e.values = it->second;
    e.provider_tag = tag_;
    e.normalize();
    return e;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string base_url, std::string model, int dim,
                                                 int max_retries)
    : base_url_(std::move(base_url)), model_(std::move(model)), dim_(dim),
      max_retries_(max_retries) {}

EmbeddingVector RemoteEmbeddingProvider::embed(const std::string& text) {
    return embed_batch({text}).at(0);
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
    json body;
    body["model"] = model_;
    body["input"] = texts;

    httplib::Headers headers;
    if (const char* key = std::getenv("RMD_EMBED_API_KEY"))
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        httplib::Client client(base_url_);
        client.set_read_timeout(60, 0);
        auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
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
            std::vector<EmbeddingVector> out;
            for (const auto& item : reply.at("data")) {
                EmbeddingVector e;
                e.values = item.at("embedding").get<std::vector<double>>();
                e.provider_tag = tag();
                if (e.dim() != dim_)
                    throw ProviderError("remote embedding dimension " + std::to_string(e.dim()) +
                                        " does not match configured " + std::to_string(dim_));
                e.normalize();
                out.push_back(std::move(e));
            }
            if (out.size() != texts.size())
                throw ProviderError("remote embedding reply count mismatch");
            return out;
        } catch (const json::exception& e) {
            last_error = std::string("bad reply: ") + e.what();
        }
    }
    throw ProviderError("embedding request failed after " + std::to_string(max_retries_ + 1) +
                        " attempts: " + last_error);
}

}  // namespace rmd
