#include "catbench/embeddings.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "catbench/errors.hpp"
#include "http_util.hpp"

namespace catbench {

using json = nlohmann::json;

namespace {

constexpr std::string_view kCacheMagic = "EMB1";

std::string_view kind_name(EmbeddingKind kind) { return kind == EmbeddingKind::Text ? "text" : "image"; }

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingCache

EmbeddingCache::EmbeddingCache(std::uint32_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw ArgumentError("embedding dimension must be >= 1");
}

const std::vector<float>* EmbeddingCache::find(const Digest& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingCache::put(const Digest& key, std::span<const double> values) {
    if (values.size() != dimension_)
        throw ContractError("embedding has length " + std::to_string(values.size()) + ", expected " +
                            std::to_string(dimension_));
    std::vector<float> stored(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        stored[i] = static_cast<float>(values[i]);
        if (!std::isfinite(stored[i])) throw ContractError("non-finite embedding value at index " + std::to_string(i));
    }
    entries_[key] = std::move(stored);
}

std::vector<std::uint8_t> EmbeddingCache::encode() const {
    ByteWriter body;
    body.put_u32(dimension_);
    body.put_u64(entries_.size());
    for (const auto& [key, vec] : entries_) {
        body.put_bytes(std::span<const std::uint8_t>(key));
        for (float v : vec) body.put_f32(v);
    }
    ByteWriter out;
    out.put_bytes(kCacheMagic);
    out.put_bytes(std::span<const std::uint8_t>(body.bytes()));
    out.put_u32(crc32(body.bytes()));
    return out.bytes();
}

EmbeddingCache EmbeddingCache::decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kCacheMagic.size() + 4 + 8 + 4) throw IntegrityError("embedding cache too short");
    if (!std::equal(kCacheMagic.begin(), kCacheMagic.end(), bytes.begin()))
        throw IntegrityError("embedding cache has bad magic");
    auto body = bytes.subspan(kCacheMagic.size(), bytes.size() - kCacheMagic.size() - 4);
    ByteReader crc_reader(bytes.subspan(bytes.size() - 4));
    if (crc_reader.get_u32() != crc32(body)) throw IntegrityError("embedding cache CRC mismatch");

    ByteReader r(body);
    auto dim = r.get_u32();
    auto count = r.get_u64();
    if (dim == 0) throw IntegrityError("embedding cache declares dimension 0");
    const std::uint64_t entry_size = 32 + 4ull * dim;
    if (count > r.remaining() / entry_size || r.remaining() != count * entry_size)
        throw IntegrityError("embedding cache entry count does not match body size");

    EmbeddingCache cache(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        Digest key;
        auto kb = r.take(32);
        std::copy(kb.begin(), kb.end(), key.begin());
        std::vector<float> vec(dim);
        for (auto& v : vec) v = r.get_f32();
        cache.entries_.emplace(key, std::move(vec));
    }
    return cache;
}

EmbeddingCache EmbeddingCache::load(const std::string& path) {
    auto raw = read_file(path);
    return decode(as_bytes(raw));
}

void EmbeddingCache::save(const std::string& path) const {
    auto bytes = encode();
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------
// Providers

std::vector<double> CacheProvider::fetch(EmbeddingKind, const std::string& payload) {
    const auto* hit = cache_->find(embedding_key(payload));
    if (!hit) throw MissingEmbeddingError(payload);
    return {hit->begin(), hit->end()};
}

std::vector<double> CachingProvider::fetch(EmbeddingKind kind, const std::string& payload) {
    if (const auto* hit = cache_->find(embedding_key(payload))) return {hit->begin(), hit->end()};
    return upstream_->fetch(kind, payload);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::size_t dimension,
                                             std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), dimension_(dimension), timeout_(timeout) {
    if (dimension_ == 0) throw ConfigError("embedding dimension must be >= 1");
    detail::split_url(endpoint_);
}

std::vector<double> HttpEmbeddingProvider::fetch(EmbeddingKind kind, const std::string& payload) {
    auto url = detail::split_url(endpoint_);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    json req = {{"kind", kind_name(kind)}, {"payload", payload}};
    auto res = client.Post(url.path_prefix + "/embed", req.dump(), "application/json");
    if (!res) throw TransportError("embedding service unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("embedding service returned HTTP " + std::to_string(res->status));

    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::parse_error&) {
        throw ContractError("embedding service returned invalid JSON");
    }
    if (!body.is_object() || !body.contains("vector") || !body["vector"].is_array())
        throw ContractError("embedding service response lacks a 'vector' array");
    std::vector<double> out;
    out.reserve(body["vector"].size());
    for (const auto& v : body["vector"]) {
        if (!v.is_number()) throw ContractError("embedding service returned a non-numeric entry");
        out.push_back(v.get<double>());
    }
    if (body.contains("dim") && (!body["dim"].is_number_integer() || body["dim"].get<std::int64_t>() !=
                                                                         static_cast<std::int64_t>(out.size())))
        throw ContractError("embedding service 'dim' disagrees with vector length");
    return out;
}

void EmbeddingProviderConfig::validate() const {
    if (dimension == 0) throw ConfigError("provider dimension must be >= 1");
    if (mode == ProviderMode::FileCache && cache_path.empty()) throw ConfigError("file-cache mode needs cache_path");
    if (mode == ProviderMode::HttpService && endpoint.empty()) throw ConfigError("http-service mode needs endpoint");
    if (timeout.count() <= 0) throw ConfigError("provider timeout must be positive");
}

std::shared_ptr<EmbeddingProvider> make_provider(const EmbeddingProviderConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ProviderMode::HttpService)
        return std::make_shared<HttpEmbeddingProvider>(cfg.endpoint, cfg.dimension, cfg.timeout);
    auto cache = std::make_shared<EmbeddingCache>(EmbeddingCache::load(cfg.cache_path));
    if (cache->dimension() != cfg.dimension)
        throw CompatibilityError("cache dimension " + std::to_string(cache->dimension()) +
                                 " does not match configured dimension " + std::to_string(cfg.dimension));
    return std::make_shared<CacheProvider>(std::move(cache));
}

// ---------------------------------------------------------------------------
// Aggregation

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider, AggregationOptions opts)
    : provider_(std::move(provider)), opts_(opts) {
    if (!provider_) throw ArgumentError("embedder needs a provider");
    if (!(opts_.text_weight >= 0.0 && opts_.text_weight <= 1.0)) throw ArgumentError("text_weight must be in [0, 1]");
}

EmbeddingVector Embedder::checked_fetch(EmbeddingKind kind, const std::string& payload) const {
    auto values = provider_->fetch(kind, payload);
    if (values.size() != provider_->dimension())
        throw ContractError("provider returned " + std::to_string(values.size()) + " values for '" + payload +
                            "', expected " + std::to_string(provider_->dimension()));
    for (double v : values)
        if (!std::isfinite(v)) throw ContractError("provider returned a non-finite value for '" + payload + "'");
    return {std::move(values)};
}

EmbeddingVector Embedder::embed_text(const std::string& text) const {
    if (text.empty()) throw ArgumentError("embed_text needs non-empty text");
    return checked_fetch(EmbeddingKind::Text, text);
}

EmbeddingVector Embedder::embed_images(std::span<const std::string> images) const {
    if (images.empty()) throw ArgumentError("embed_images needs at least one image");
    std::vector<double> sum(dimension(), 0.0);
    for (const auto& ref : images) {
        auto v = checked_fetch(EmbeddingKind::Image, ref);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v.values[i];
    }
    const double n = static_cast<double>(images.size());
    for (auto& s : sum) s /= n;
    return {std::move(sum)};
}

AggregatedInput Embedder::aggregate(const std::optional<std::string>& text, std::span<const std::string> images) const {
    const bool has_text = text.has_value() && !text->empty();
    if (!has_text && images.empty()) throw ArgumentError("aggregate needs text or images");

    std::vector<double> out;
    if (!has_text) {
        out = embed_images(images).values;
    } else if (images.empty()) {
        out = embed_text(*text).values;
    } else {
        auto t = embed_text(*text).values;
        auto m = embed_images(images).values;
        out.resize(t.size());
        if (opts_.text_weight == 0.5) {
            for (std::size_t i = 0; i < t.size(); ++i) out[i] = (t[i] + m[i]) / 2.0;
        } else {
            const double w = opts_.text_weight;
            for (std::size_t i = 0; i < t.size(); ++i) out[i] = w * t[i] + (1.0 - w) * m[i];
        }
    }
    if (opts_.l2_normalize) {
        double norm = 0.0;
        for (double v : out) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (auto& v : out) v /= norm;
    }
    return {std::move(out)};
}

// ---------------------------------------------------------------------------
// Cache warming

WarmReport warm_cache(const Dataset& ds, EmbeddingProvider& provider, const std::string& cache_path,
                      std::size_t max_concurrency) {
    EmbeddingCache cache = std::filesystem::exists(cache_path)
                               ? EmbeddingCache::load(cache_path)
                               : EmbeddingCache(static_cast<std::uint32_t>(provider.dimension()));
    if (cache.dimension() != provider.dimension())
        throw CompatibilityError("existing cache has dimension " + std::to_string(cache.dimension()) +
                                 ", provider declares " + std::to_string(provider.dimension()));

    std::set<std::pair<std::string, EmbeddingKind>> wanted;
    for (const auto& ex : ds.examples) {
        if (ex.input.text()) wanted.emplace(*ex.input.text(), EmbeddingKind::Text);
        for (const auto& ref : ex.input.image_refs()) wanted.emplace(ref, EmbeddingKind::Image);
    }

    WarmReport report;
    std::set<std::string> seen;
    std::vector<std::pair<std::string, EmbeddingKind>> todo;
    for (const auto& [payload, kind] : wanted) {
        if (!seen.insert(payload).second) continue;
        ++report.requested;
        if (cache.contains(embedding_key(payload)))
            ++report.already_cached;
        else
            todo.emplace_back(payload, kind);
    }

    struct Outcome {
        std::vector<double> values;
        bool ok = false;
    };
    std::vector<Outcome> outcomes(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size(); i = next++) {
            try {
                auto v = provider.fetch(todo[i].second, todo[i].first);
                bool finite = v.size() == cache.dimension();
                for (double x : v) finite = finite && std::isfinite(x);
                outcomes[i] = {std::move(v), finite};
            } catch (const std::exception&) {
                outcomes[i].ok = false;
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(max_concurrency, todo.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (outcomes[i].ok) {
            cache.put(embedding_key(todo[i].first), outcomes[i].values);
            ++report.fetched;
        } else {
            report.failed.push_back(todo[i].first);
        }
    }
    if (report.fetched > 0 || !std::filesystem::exists(cache_path)) cache.save(cache_path);
    return report;
}

}  // namespace catbench
