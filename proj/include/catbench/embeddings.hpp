#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catbench/codec.hpp"
#include "catbench/dataset.hpp"

namespace catbench {

/// One provider output for a single text or image.
struct EmbeddingVector {
    std::vector<double> values;
};

/// The pooled per-observation input to the classifier.
struct AggregatedInput {
    std::vector<double> values;
};

enum class EmbeddingKind { Text, Image };

/// Source of raw embeddings. Implementations must be callable from several
/// threads at once (cache warming issues concurrent requests).
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    /// Raw provider answer; length and finiteness are checked by the caller.
    virtual std::vector<double> fetch(EmbeddingKind kind, const std::string& payload) = 0;
};

/// Cache key: SHA-256 of the exact text bytes or of the image reference string.
inline Digest embedding_key(const std::string& payload) { return sha256(payload); }

/// In-memory view of the binary "EMB1" cache file.
///
/// Layout (little-endian): magic "EMB1", u32 dimension, u64 entry count, then
/// per entry a 32-byte key followed by `dimension` f32 values, then a u32 CRC-32
/// of everything between the magic and the CRC.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::uint32_t dimension);

    static EmbeddingCache load(const std::string& path);
    static EmbeddingCache decode(std::span<const std::uint8_t> bytes);

    std::vector<std::uint8_t> encode() const;
    void save(const std::string& path) const;

    std::uint32_t dimension() const { return dimension_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(const Digest& key) const { return entries_.count(key) != 0; }
    const std::vector<float>* find(const Digest& key) const;

    /// Stores `values` rounded to f32. Throws ContractError on length mismatch or non-finite values.
    void put(const Digest& key, std::span<const double> values);

private:
    std::uint32_t dimension_;
    std::map<Digest, std::vector<float>> entries_;
};

/// file-cache mode: every lookup must hit the cache.
class CacheProvider final : public EmbeddingProvider {
public:
    explicit CacheProvider(std::shared_ptr<const EmbeddingCache> cache) : cache_(std::move(cache)) {}
    std::size_t dimension() const override { return cache_->dimension(); }
    std::vector<double> fetch(EmbeddingKind kind, const std::string& payload) override;

private:
    std::shared_ptr<const EmbeddingCache> cache_;
};

/// http-service mode: POST /embed {"kind", "payload"} -> {"vector", "dim"}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string endpoint, std::size_t dimension, std::chrono::milliseconds timeout);
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> fetch(EmbeddingKind kind, const std::string& payload) override;

private:
    std::string endpoint_;
    std::size_t dimension_;
    std::chrono::milliseconds timeout_;
};

/// Serves cache hits locally and falls through to another provider on a miss.
class CachingProvider final : public EmbeddingProvider {
public:
    CachingProvider(std::shared_ptr<const EmbeddingCache> cache, std::shared_ptr<EmbeddingProvider> upstream)
        : cache_(std::move(cache)), upstream_(std::move(upstream)) {}
    std::size_t dimension() const override { return cache_->dimension(); }
    std::vector<double> fetch(EmbeddingKind kind, const std::string& payload) override;

private:
    std::shared_ptr<const EmbeddingCache> cache_;
    std::shared_ptr<EmbeddingProvider> upstream_;
};

enum class ProviderMode { FileCache, HttpService };

struct EmbeddingProviderConfig {
    ProviderMode mode = ProviderMode::FileCache;
    std::size_t dimension = 0;
    std::string endpoint;    // http-service
    std::string cache_path;  // file-cache, and the warm_cache target
    std::chrono::milliseconds timeout{10000};
    std::size_t max_concurrency = 4;

    void validate() const;
};

std::shared_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderConfig& cfg);

struct AggregationOptions {
    /// Weight on the text vector when both are present; the image mean gets 1 - text_weight.
    double text_weight = 0.5;
    /// Off by default: the pooled vector is a plain average.
    bool l2_normalize = false;
};

/// Pools provider embeddings into one classifier input per problem description.
class Embedder {
public:
    explicit Embedder(std::shared_ptr<EmbeddingProvider> provider, AggregationOptions opts = {});

    std::size_t dimension() const { return provider_->dimension(); }

    EmbeddingVector embed_text(const std::string& text) const;
    /// Element-wise mean of the per-image vectors. Fails as a whole on any missing image.
    EmbeddingVector embed_images(std::span<const std::string> images) const;

    /// Text only -> text vector; images only -> image mean; both -> weighted mean of the two.
    AggregatedInput aggregate(const std::optional<std::string>& text, std::span<const std::string> images) const;
    AggregatedInput aggregate(const ProblemDescription& input) const {
        return aggregate(input.text(), input.image_refs());
    }

private:
    EmbeddingVector checked_fetch(EmbeddingKind kind, const std::string& payload) const;

    std::shared_ptr<EmbeddingProvider> provider_;
    AggregationOptions opts_;
};

struct WarmReport {
    std::size_t requested = 0;       // distinct keys in the dataset
    std::size_t already_cached = 0;
    std::size_t fetched = 0;
    std::vector<std::string> failed;  // payloads that could not be fetched
};

/// Fetches every distinct text and image reference of `ds` missing from the cache
/// at `cache_path` and rewrites the cache. An unreadable or corrupt existing cache
/// raises IntegrityError before any provider call.
WarmReport warm_cache(const Dataset& ds, EmbeddingProvider& provider, const std::string& cache_path,
                      std::size_t max_concurrency = 4);

}  // namespace catbench
