#pragma once
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowmine/corpus.hpp"
#include "flowmine/embeddings.hpp"

namespace flowmine {

enum class Linkage { Average, Complete, Single };

std::string_view linkage_name(Linkage linkage);
// Accepts "average", "complete", "single"; throws ConfigError otherwise.
Linkage parse_linkage(std::string_view name);

struct NormalizerConfig {
    double user_threshold = 0.9;
    double agent_threshold = 0.7;
    Linkage linkage = Linkage::Average;

    void validate() const;
};

struct ClusterMember {
    std::string form;
    size_t frequency = 0;
    bool operator==(const ClusterMember&) const = default;
};

struct FormCluster {
    std::vector<ClusterMember> members; // sorted by form
    std::string representative;
    bool operator==(const FormCluster&) const = default;
};

struct ClusterAssignment {
    SpeakerRole role = SpeakerRole::User;
    std::vector<FormCluster> clusters; // ordered by smallest member
    bool operator==(const ClusterAssignment&) const = default;
};

// Distances merged within this absolute tolerance count as ties.
inline constexpr double kLinkageTieTolerance = 1e-12;

// Bottom-up clustering over a symmetric distance matrix. Items are expected
// in lexicographic order of their labels: ties on the minimal linkage
// distance merge the pair with the smallest (min index, min index) key.
// Merging stops once the minimal linkage distance exceeds threshold.
// Returns clusters as sorted index lists, ordered by smallest index.
std::vector<std::vector<size_t>> agglomerate(const std::vector<std::vector<double>>& distances, double threshold,
                                             Linkage linkage);

// forms: unique role-prefixed form -> corpus frequency.
ClusterAssignment cluster_forms(SpeakerRole role, const std::map<std::string, size_t>& forms, double threshold,
                                Linkage linkage, EmbeddingCache& cache, EmbeddingProvider* provider);

class NormalizationMap {
public:
    // Throws ValidationError if form is already mapped for role.
    void add(SpeakerRole role, const std::string& form, const std::string& representative);
    std::optional<std::string> lookup(SpeakerRole role, std::string_view form) const;
    const std::map<std::pair<SpeakerRole, std::string>, std::string>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool operator==(const NormalizationMap&) const = default;

private:
    std::map<std::pair<SpeakerRole, std::string>, std::string> entries_;
};

NormalizationMap build_normalization_map(const std::vector<ClusterAssignment>& assignments);

// Keyed on each turn's role-prefixed form; throws ValidationError naming a missing form.
Corpus apply_normalization(const Corpus& corpus, const NormalizationMap& map);

// Role-prefixed form frequencies for one role.
std::map<std::string, size_t> collect_forms(const Corpus& corpus, SpeakerRole role);

struct Normalization {
    ClusterAssignment user;
    ClusterAssignment agent;
    NormalizationMap map;
};

// Clusters user and agent forms independently (in parallel) and builds the map.
Normalization fit_normalization(const Corpus& corpus, const NormalizerConfig& cfg, EmbeddingCache& cache,
                                EmbeddingProvider* provider);

std::string clusters_to_json(const Normalization& normalization);
std::string normalization_map_to_json(const NormalizationMap& map);

} // namespace flowmine
