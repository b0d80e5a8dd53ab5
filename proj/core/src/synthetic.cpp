#include "flowmine/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "flowmine/error.hpp"
#include "text.hpp"

namespace flowmine {

const SyntheticPolicy& synthetic_policy() {
    static const SyntheticPolicy policy = [] {
        SyntheticPolicy p;
        p.happy_path = {"user request weather information",
                        "bot ask for city",
                        "user provide city",
                        "bot provide weather forecast",
                        "user request music",
                        "bot recommend song",
                        "user acknowledge recommended song",
                        "bot ask if song should be played",
                        "user confirm request to play song",
                        "bot inform song is playing",
                        "user thank",
                        "bot ask if any other help is needed",
                        "user thank and say goodbye",
                        "bot say goodbye"};
        p.frequent_digression = {"user ask for humidity",     "bot provide humidity",
                                 "user ask about wind speed", "bot provide wind speed",
                                 "user ask about uv index",   "bot provide uv index"};
        p.frequent_after = 3;
        p.rare_digression = {"user ask for genre", "bot provide genre"};
        p.rare_after = 7;
        p.paraphrases = {{"bot ask which city", "bot ask for city"},
                         {"user give city name", "user provide city"},
                         {"bot give weather forecast", "bot provide weather forecast"},
                         {"user ask to play some music", "user request music"},
                         {"user say thanks", "user thank"},
                         {"bot say bye", "bot say goodbye"}};
        return p;
    }();
    return policy;
}

namespace {

// Portable helpers so output does not depend on the standard library's
// distribution implementations.
double unit_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

size_t below(std::mt19937_64& rng, size_t n) { return static_cast<size_t>(unit_real(rng) * static_cast<double>(n)); }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

const std::vector<std::string>& noise_words() {
    static const std::vector<std::string> words = {"parking", "story",   "slow",     "app",     "capabilities",
                                                   "refund",  "weekend", "traffic",  "battery", "password",
                                                   "coupon",  "delivery", "holiday", "printer", "invoice",
                                                   "garden",  "museum",  "taxi",     "ticket",  "lunch"};
    return words;
}

std::string utterance_for(const std::string& form) {
    auto space = form.find(' ');
    return "(" + form.substr(space + 1) + ")";
}

} // namespace

Corpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.conversations == 0) throw ValidationError("synthetic corpus needs at least one conversation");
    const SyntheticPolicy& policy = synthetic_policy();
    std::map<std::string, std::vector<std::string>> variants;
    for (const auto& [alias, base] : policy.paraphrases) variants[base].push_back(alias);

    std::mt19937_64 rng(spec.seed);
    std::set<std::string> used;
    auto noise_form = [&](const char* role) {
        const auto& words = noise_words();
        while (true) {
            std::string f = std::string(role) + " " + words[below(rng, words.size())] + " " +
                            words[below(rng, words.size())] + " " + words[below(rng, words.size())];
            if (used.insert(f).second) return f;
        }
    };

    std::vector<char> kinds;
    while (kinds.size() < spec.conversations) {
        std::vector<char> block(20, 'H');
        block[0] = block[1] = block[2] = 'A';
        block[3] = 'B';
        for (size_t i = block.size() - 1; i > 0; --i) std::swap(block[i], block[below(rng, i + 1)]);
        kinds.insert(kinds.end(), block.begin(), block.end());
    }
    kinds.resize(spec.conversations);

    std::vector<Conversation> convs;
    for (size_t c = 0; c < kinds.size(); ++c) {
        std::vector<std::string> seq = policy.happy_path;
        if (kinds[c] == 'A')
            seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(policy.frequent_after) + 1,
                       policy.frequent_digression.begin(), policy.frequent_digression.end());
        else if (kinds[c] == 'B')
            seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(policy.rare_after) + 1,
                       policy.rare_digression.begin(), policy.rare_digression.end());
        std::vector<std::string> forms;
        for (size_t k = 0; k < seq.size(); k += 2) {
            if (k > 0 && unit_real(rng) < spec.noise_probability) {
                forms.push_back(noise_form("user"));
                forms.push_back(noise_form("bot"));
            }
            for (size_t j = k; j < std::min(k + 2, seq.size()); ++j) forms.push_back(seq[j]);
        }
        for (auto& f : forms) {
            auto v = variants.find(f);
            if (v != variants.end() && unit_real(rng) < spec.paraphrase_probability)
                f = v->second[below(rng, v->second.size())];
        }
        Conversation conv;
        char id[32];
        std::snprintf(id, sizeof id, "synth-%04zu", c);
        conv.id = id;
        conv.domain = "weather_music";
        for (const auto& f : forms) {
            Turn t;
            t.role = f.starts_with("user ") ? SpeakerRole::User : SpeakerRole::Agent;
            t.text = utterance_for(f);
            t.canonical_form = f;
            conv.turns.push_back(std::move(t));
        }
        convs.push_back(std::move(conv));
    }
    return Corpus(std::move(convs));
}

SyntheticEmbeddingProvider::SyntheticEmbeddingProvider(std::uint64_t seed, size_t dim,
                                                       std::map<std::string, std::string> paraphrases,
                                                       double paraphrase_noise, double decay)
    : seed_(seed), dim_(dim), paraphrases_(std::move(paraphrases)), paraphrase_noise_(paraphrase_noise),
      decay_(decay) {
    if (dim_ == 0) throw ValidationError("synthetic embedding dim must be positive");
    if (!(decay_ > 0.0 && decay_ <= 1.0)) throw ValidationError("synthetic embedding decay must be in (0, 1]");
}

std::string SyntheticEmbeddingProvider::tag() const {
    return "synthetic:" + std::to_string(seed_) + ":" + std::to_string(dim_);
}

std::vector<double> SyntheticEmbeddingProvider::seeded_direction(const std::string& key, std::uint64_t salt) const {
    std::mt19937_64 rng(fnv1a(key) ^ (seed_ * 0x9E3779B97F4A7C15ull) ^ salt);
    std::vector<double> v(dim_);
    for (auto& x : v) x = 2.0 * unit_real(rng) - 1.0;
    return v;
}

std::vector<double> SyntheticEmbeddingProvider::form_vector(const std::string& form) const {
    auto alias = paraphrases_.find(form);
    std::vector<double> v = seeded_direction(alias == paraphrases_.end() ? form : alias->second, 0);
    if (alias != paraphrases_.end()) {
        auto noise = seeded_direction(form, 0x5bd1e995ull);
        for (size_t i = 0; i < dim_; ++i) v[i] += paraphrase_noise_ * noise[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

std::vector<double> SyntheticEmbeddingProvider::embed_text(const std::string& text) const {
    std::vector<std::string> forms;
    for (const auto& tok : detail::split_whitespace(text)) {
        if (forms.empty() || tok == "user" || tok == "bot") forms.push_back(tok);
        else forms.back() += " " + tok;
    }
    if (forms.empty()) throw EmbeddingError("cannot embed empty text");
    std::vector<double> out(dim_, 0.0);
    double weight = 1.0;
    for (const auto& f : forms) {
        auto v = form_vector(f);
        for (size_t i = 0; i < dim_; ++i) out[i] += weight * v[i];
        weight *= decay_;
    }
    return out;
}

std::vector<std::vector<double>> SyntheticEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
}

} // namespace flowmine
