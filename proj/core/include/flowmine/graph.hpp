#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowmine/corpus.hpp"
#include "flowmine/flow.hpp"

namespace flowmine {

// Weighted directed transition graph over role-prefixed canonical forms.
// Node ids are positions in the lexicographically sorted node list, so the
// structure is independent of conversation order.
class InteractionGraph {
public:
    using NodeId = std::uint32_t;
    struct Edge {
        NodeId to;
        std::int64_t weight;
        bool operator==(const Edge&) const = default;
    };
    struct EdgeRecord {
        std::string from;
        std::string to;
        std::int64_t weight;
        bool operator==(const EdgeRecord&) const = default;
    };

    InteractionGraph() = default;
    static InteractionGraph from_sequences(std::span<const std::vector<std::string>> sequences);
    // Throws GraphError on inconsistent counts or unknown endpoints.
    static InteractionGraph from_parts(std::vector<EdgeRecord> edges, std::map<std::string, std::int64_t> first,
                                       std::map<std::string, std::int64_t> last,
                                       std::vector<std::string> extra_nodes = {});

    const std::vector<std::string>& nodes() const { return nodes_; }
    size_t node_count() const { return nodes_.size(); }
    std::optional<NodeId> find(std::string_view name) const;
    const std::string& name(NodeId id) const { return nodes_.at(id); }
    // Out-edges sorted by target name (self-loops included).
    std::span<const Edge> out_edges(NodeId id) const { return adjacency_.at(id); }
    std::int64_t weight(std::string_view from, std::string_view to) const;
    std::vector<EdgeRecord> edges() const;
    const std::map<std::string, std::int64_t, std::less<>>& first_turn_counts() const { return first_; }
    const std::map<std::string, std::int64_t, std::less<>>& last_turn_counts() const { return last_; }
    std::int64_t conversation_count() const;
    std::int64_t total_weight() const;

    bool operator==(const InteractionGraph&) const = default;

private:
    std::vector<std::string> nodes_;
    std::vector<std::vector<Edge>> adjacency_;
    std::map<std::string, std::int64_t, std::less<>> first_;
    std::map<std::string, std::int64_t, std::less<>> last_;
};

InteractionGraph build_graph(const Corpus& corpus);

struct Endpoints {
    std::string source;
    std::string target;
    bool operator==(const Endpoints&) const = default;
};

Endpoints select_endpoints(const InteractionGraph& graph);

// Deterministic DOT text; flow edges are highlighted when a flow is given.
std::string export_dot(const InteractionGraph& graph, const DialogueFlow* highlight = nullptr);

std::string graph_to_json(const InteractionGraph& graph);
InteractionGraph graph_from_json(const std::string& text);

// Recomputes bottleneck and total weight; throws GraphError if a step is not an edge.
DialoguePath make_path(const InteractionGraph& graph, std::vector<std::string> nodes);

} // namespace flowmine
