#pragma once
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "flowmine/embeddings.hpp"
#include "flowmine/flow.hpp"
#include "flowmine/graph.hpp"

namespace flowmine {

struct ExtractorConfig {
    double epsilon = 0.8;
    double kappa = 0.8;
    size_t max_digressions = 1;
    size_t max_path_nodes = 64;
    // Budget on memoized search states for the simple-path searches.
    size_t max_search_states = 4'000'000;

    // Throws ValidationError when a field is out of range.
    void validate() const;
};

// Maximizes the bottleneck; ties by higher total weight, fewer nodes, then
// lexicographic node sequence. widest_path(g, s, s) is the single node path.
DialoguePath widest_path(const InteractionGraph& graph, std::string_view s, std::string_view t,
                         const ExtractorConfig& cfg = {});
// Maximizes node count; ties by higher total weight, then lexicographic.
DialoguePath longest_simple_path(const InteractionGraph& graph, std::string_view s, std::string_view t,
                                 const ExtractorConfig& cfg = {});
// Maximizes total weight; ties by fewer nodes, then lexicographic.
DialoguePath max_weight_simple_path(const InteractionGraph& graph, std::string_view s, std::string_view t,
                                    const ExtractorConfig& cfg = {});

struct DigressionSearch {
    std::vector<Digression> digressions; // ranked
    std::vector<std::string> dropped;    // candidates with no path to the target
};

DigressionSearch find_digressions(const InteractionGraph& graph, const DialoguePath& main, const ExtractorConfig& cfg,
                                  EmbeddingCache& cache, EmbeddingProvider* provider);

DialogueFlow assemble_flow(DialoguePath main, const std::vector<Digression>& digressions, size_t k,
                           std::string method_tag);

} // namespace flowmine
