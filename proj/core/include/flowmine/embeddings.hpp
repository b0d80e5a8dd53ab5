#pragma once
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowmine {

// Unit-length, finite, fixed-dimension vector.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    // Normalizes raw values; throws EmbeddingError on empty, non-finite or zero input.
    static EmbeddingVector normalized(std::vector<double> raw);
    // Accepts values that are already unit length (within 1e-6) without touching them.
    static EmbeddingVector from_unit(std::vector<double> values);

    std::span<const double> values() const { return values_; }
    size_t dim() const { return values_.size(); }
    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b);

// Source of raw embedding vectors; one call per batch of texts.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string tag() const = 0;
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) = 0;
};

// Exact-text keyed vector store. Reads are concurrent, writes serialized, and
// concurrent misses on the same text trigger a single provider call.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::string provider_tag = {}, size_t dim = 0);
    EmbeddingCache(const EmbeddingCache&) = delete;
    EmbeddingCache& operator=(const EmbeddingCache&) = delete;

    static std::unique_ptr<EmbeddingCache> load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<EmbeddingVector> find(std::string_view text) const;
    // Throws EmbeddingError on dimension mismatch.
    void insert(const std::string& text, EmbeddingVector vec);

    size_t size() const;
    size_t dim() const;
    std::string provider_tag() const;
    // Adopts the provider's tag when the cache has none; refuses a different one.
    void bind_provider(const std::string& tag);

    EmbeddingVector get(const std::string& text, EmbeddingProvider* provider);
    std::vector<EmbeddingVector> get_all(const std::vector<std::string>& texts, EmbeddingProvider* provider);

private:
    mutable std::shared_mutex mutex_;
    std::mutex fetch_mutex_;
    std::map<std::string, EmbeddingVector, std::less<>> entries_;
    std::string provider_tag_;
    size_t dim_ = 0;
};

EmbeddingVector embed(const std::string& text, EmbeddingCache& cache, EmbeddingProvider* provider);

// Talks to a POST {"texts": [...]} -> {"vectors": [[...]]} endpoint.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    struct Options {
        std::string endpoint; // http://host:port/path
        std::string tag;      // defaults to "http:" + endpoint
        std::string api_key;  // sent as a bearer token when non-empty
        std::chrono::milliseconds timeout{30000};
        int max_retries = 3;
        std::chrono::milliseconds initial_backoff{200};
        size_t batch_size = 64;
    };
    explicit HttpEmbeddingProvider(Options options);

    std::string tag() const override;
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override;

private:
    Options options_;
};

} // namespace flowmine
