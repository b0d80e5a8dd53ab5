#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowmine/corpus.hpp"
#include "flowmine/embeddings.hpp"

namespace flowmine {

struct SyntheticSpec {
    size_t conversations = 300;
    std::uint64_t seed = 7;
    // Chance of an off-script user/bot exchange before each user turn after the first.
    double noise_probability = 0.13;
    // Chance that a form with a known paraphrase is emitted as that paraphrase.
    double paraphrase_probability = 0.1;
};

// Ground-truth policy the generator samples from.
struct SyntheticPolicy {
    std::vector<std::string> happy_path;
    std::vector<std::string> frequent_digression; // 3 of every 20 conversations
    size_t frequent_after = 0;                     // inserted after happy_path[frequent_after]
    std::vector<std::string> rare_digression;      // 1 of every 20 conversations
    size_t rare_after = 0;
    std::map<std::string, std::string> paraphrases; // paraphrase -> base form
};

const SyntheticPolicy& synthetic_policy();

// Blocks of 20 conversations hold exactly 3 frequent-digression, 1 rare-digression
// and 16 happy-path conversations in shuffled order.
Corpus generate_synthetic_corpus(const SyntheticSpec& spec);

// Deterministic embeddings: text is split into forms at "user"/"bot" tokens;
// each form maps to a hash-seeded random direction (paraphrases lie close to
// their base form) and a multi-form text is the decayed sum of its forms.
class SyntheticEmbeddingProvider : public EmbeddingProvider {
public:
    SyntheticEmbeddingProvider(std::uint64_t seed = 7, size_t dim = 256,
                               std::map<std::string, std::string> paraphrases = synthetic_policy().paraphrases,
                               double paraphrase_noise = 0.35, double decay = 0.7);

    std::string tag() const override;
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override;
    std::vector<double> embed_text(const std::string& text) const;

private:
    std::vector<double> form_vector(const std::string& form) const;
    std::vector<double> seeded_direction(const std::string& key, std::uint64_t salt) const;

    std::uint64_t seed_;
    size_t dim_;
    std::map<std::string, std::string> paraphrases_;
    double paraphrase_noise_;
    double decay_;
};

} // namespace flowmine
