#include "flowmine/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "flowmine/error.hpp"
#include "http.hpp"

namespace flowmine {

using json = nlohmann::json;

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    if (raw.empty()) throw EmbeddingError("empty embedding vector");
    double sq = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v)) throw EmbeddingError("non-finite embedding value");
        sq += v * v;
    }
    if (sq == 0.0) throw EmbeddingError("zero embedding vector cannot be normalized");
    double norm = std::sqrt(sq);
    for (double& v : raw) v /= norm;
    EmbeddingVector out;
    out.values_ = std::move(raw);
    return out;
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
    if (values.empty()) throw EmbeddingError("empty embedding vector");
    double sq = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw EmbeddingError("non-finite embedding value");
        sq += v * v;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) return normalized(std::move(values));
    EmbeddingVector out;
    out.values_ = std::move(values);
    return out;
}

namespace {
void check_dims(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw EmbeddingError("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
}
} // namespace

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    check_dims(a, b);
    double dot = 0.0;
    auto av = a.values(), bv = b.values();
    for (size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
    return std::clamp(dot, -1.0, 1.0);
}

double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    check_dims(a, b);
    double sq = 0.0;
    auto av = a.values(), bv = b.values();
    for (size_t i = 0; i < av.size(); ++i) {
        double d = av[i] - bv[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

EmbeddingCache::EmbeddingCache(std::string provider_tag, size_t dim)
    : provider_tag_(std::move(provider_tag)), dim_(dim) {}

std::unique_ptr<EmbeddingCache> EmbeddingCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding cache " + path.string());
    std::string line;
    size_t lineno = 0;
    std::unique_ptr<EmbeddingCache> cache;
    auto where = [&](const std::string& msg) {
        return path.string() + ":" + std::to_string(lineno) + ": " + msg;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where(std::string("invalid JSON: ") + e.what()));
        }
        if (!cache) {
            if (!rec.contains("dim") || !rec["dim"].is_number_unsigned() || !rec.contains("provider_tag") ||
                !rec["provider_tag"].is_string())
                throw ParseError(where("field 'dim'/'provider_tag': header record expected"));
            size_t dim = rec["dim"].get<size_t>();
            if (dim == 0) throw ParseError(where("field 'dim': must be positive"));
            cache = std::make_unique<EmbeddingCache>(rec["provider_tag"].get<std::string>(), dim);
            continue;
        }
        if (!rec.contains("text") || !rec["text"].is_string()) throw ParseError(where("field 'text': expected a string"));
        if (!rec.contains("vector") || !rec["vector"].is_array()) throw ParseError(where("field 'vector': expected an array"));
        std::vector<double> values;
        for (const auto& v : rec["vector"]) {
            if (!v.is_number()) throw ParseError(where("field 'vector': expected numbers"));
            values.push_back(v.get<double>());
        }
        try {
            cache->insert(rec["text"].get<std::string>(), EmbeddingVector::from_unit(std::move(values)));
        } catch (const EmbeddingError& e) {
            throw ParseError(where(e.what()));
        }
    }
    if (!cache) throw ParseError(path.string() + ": empty embedding cache file");
    return cache;
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    json header = {{"dim", dim_}, {"provider_tag", provider_tag_}};
    out << header.dump() << '\n';
    for (const auto& [text, vec] : entries_) {
        json rec;
        rec["text"] = text;
        rec["vector"] = std::vector<double>(vec.values().begin(), vec.values().end());
        out << rec.dump() << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

std::optional<EmbeddingVector> EmbeddingCache::find(std::string_view text) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(text);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::insert(const std::string& text, EmbeddingVector vec) {
    std::unique_lock lock(mutex_);
    if (dim_ == 0) dim_ = vec.dim();
    if (vec.dim() != dim_)
        throw EmbeddingError("dimension mismatch for \"" + text + "\": cache dim " + std::to_string(dim_) +
                             ", vector dim " + std::to_string(vec.dim()));
    entries_.insert_or_assign(text, std::move(vec));
}

size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

size_t EmbeddingCache::dim() const {
    std::shared_lock lock(mutex_);
    return dim_;
}

std::string EmbeddingCache::provider_tag() const {
    std::shared_lock lock(mutex_);
    return provider_tag_;
}

void EmbeddingCache::bind_provider(const std::string& tag) {
    std::unique_lock lock(mutex_);
    if (provider_tag_.empty()) provider_tag_ = tag;
    else if (provider_tag_ != tag)
        throw EmbeddingError("cache holds vectors from provider \"" + provider_tag_ + "\", refusing \"" + tag + "\"");
}

EmbeddingVector EmbeddingCache::get(const std::string& text, EmbeddingProvider* provider) {
    return get_all({text}, provider).front();
}

std::vector<EmbeddingVector> EmbeddingCache::get_all(const std::vector<std::string>& texts,
                                                     EmbeddingProvider* provider) {
    for (const auto& t : texts)
        if (t.empty()) throw EmbeddingError("cannot embed empty text");
    auto lookup_all = [&](std::vector<std::string>& missing) {
        std::vector<EmbeddingVector> out(texts.size());
        std::shared_lock lock(mutex_);
        for (size_t i = 0; i < texts.size(); ++i) {
            auto it = entries_.find(texts[i]);
            if (it == entries_.end()) missing.push_back(texts[i]);
            else out[i] = it->second;
        }
        return out;
    };
    std::vector<std::string> missing;
    auto out = lookup_all(missing);
    if (missing.empty()) return out;
    if (!provider) throw EmbeddingError("cache miss for \"" + missing.front() + "\" and no embedding provider configured");

    // Serialize fetches and re-check under the fetch lock so that a text is
    // requested from the provider at most once.
    std::lock_guard fetch(fetch_mutex_);
    missing.clear();
    out = lookup_all(missing);
    if (missing.empty()) return out;
    bind_provider(provider->tag());
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::vector<std::vector<double>> raw;
    try {
        raw = provider->embed_batch(missing);
    } catch (const ServiceError& e) {
        throw EmbeddingError(std::string("embedding provider failed: ") + e.what());
    }
    if (raw.size() != missing.size())
        throw EmbeddingError("embedding provider returned " + std::to_string(raw.size()) + " vectors for " +
                             std::to_string(missing.size()) + " texts");
    for (size_t i = 0; i < missing.size(); ++i) insert(missing[i], EmbeddingVector::normalized(std::move(raw[i])));
    missing.clear();
    out = lookup_all(missing);
    return out;
}

EmbeddingVector embed(const std::string& text, EmbeddingCache& cache, EmbeddingProvider* provider) {
    return cache.get(text, provider);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(Options options) : options_(std::move(options)) {
    detail::parse_http_url(options_.endpoint);
    if (options_.tag.empty()) options_.tag = "http:" + options_.endpoint;
    if (options_.batch_size == 0) options_.batch_size = 1;
}

std::string HttpEmbeddingProvider::tag() const { return options_.tag; }

std::vector<std::vector<double>> HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    auto target = detail::parse_http_url(options_.endpoint);
    std::vector<std::vector<double>> out;
    for (size_t start = 0; start < texts.size(); start += options_.batch_size) {
        size_t end = std::min(texts.size(), start + options_.batch_size);
        json req = {{"texts", std::vector<std::string>(texts.begin() + start, texts.begin() + end)}};
        std::string body = detail::with_retries(options_.max_retries, options_.initial_backoff, [&] {
            return detail::post_json(target, req.dump(), options_.api_key, options_.timeout);
        });
        json res;
        try {
            res = json::parse(body);
        } catch (const json::parse_error&) {
            throw ServiceError("embedding service returned invalid JSON");
        }
        if (!res.contains("vectors") || !res["vectors"].is_array() || res["vectors"].size() != end - start)
            throw ServiceError("embedding service response lacks a matching 'vectors' array");
        for (const auto& v : res["vectors"]) {
            std::vector<double> vec;
            for (const auto& x : v) {
                if (!x.is_number()) throw ServiceError("embedding service returned a non-numeric value");
                vec.push_back(x.get<double>());
            }
            out.push_back(std::move(vec));
        }
    }
    return out;
}

} // namespace flowmine
