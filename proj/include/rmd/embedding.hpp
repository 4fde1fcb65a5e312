#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rmd {

// Unit-norm text embedding plus the tag of the provider that produced it.
struct EmbeddingVector {
    std::vector<double> values;
    std::string provider_tag;

    int dim() const { return static_cast<int>(values.size()); }
    double norm() const;
    void normalize();  // throws std::invalid_argument on the zero vector
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual int dim() const = 0;
    virtual std::string tag() const = 0;
};

// Deterministic stand-in for a real text encoder: lowercase, split on
// whitespace, FNV-1a 64-bit per token, scatter-add 1 into hash % dim, then
// L2-normalize. Fully specified so tests don't depend on any real model.
class StubEmbeddingProvider : public EmbeddingProvider {
public:
    explicit StubEmbeddingProvider(int dim = 512);
    EmbeddingVector embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string tag() const override;

private:
    int dim_;
};

// Serves vectors from a sidecar JSON file {"dim": D, "vectors": {text: [..]}}.
class TableEmbeddingProvider : public EmbeddingProvider {
public:
    explicit TableEmbeddingProvider(const std::string& path);
    EmbeddingVector embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string tag() const override { return tag_; }

private:
    int dim_ = 0;
    std::string tag_;
    std::map<std::string, std::vector<double>> vectors_;
};

// OpenAI-style /v1/embeddings endpoint. Bearer token from RMD_EMBED_API_KEY.
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::string base_url, std::string model, int dim,
                            int max_retries = 2);
    EmbeddingVector embed(const std::string& text) override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);
    int dim() const override { return dim_; }
    std::string tag() const override { return "remote:" + model_; }

private:
    std::string base_url_;
    std::string model_;
    int dim_;
    int max_retries_;
};

}  // namespace rmd
