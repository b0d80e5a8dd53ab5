#include "flowmine/graph.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "flowmine/error.hpp"
#include "json_util.hpp"

namespace flowmine {

using detail::ordered_json;

InteractionGraph InteractionGraph::from_parts(std::vector<EdgeRecord> edges, std::map<std::string, std::int64_t> first,
                                              std::map<std::string, std::int64_t> last,
                                              std::vector<std::string> extra_nodes) {
    std::set<std::string> names(extra_nodes.begin(), extra_nodes.end());
    for (const auto& e : edges) {
        if (e.weight < 1) throw GraphError("edge " + e.from + " -> " + e.to + " has non-positive weight");
        names.insert(e.from);
        names.insert(e.to);
    }
    std::int64_t first_sum = 0, last_sum = 0;
    for (const auto& [n, c] : first) {
        if (c < 1) throw GraphError("non-positive first-turn count for " + n);
        names.insert(n);
        first_sum += c;
    }
    for (const auto& [n, c] : last) {
        if (c < 1) throw GraphError("non-positive last-turn count for " + n);
        names.insert(n);
        last_sum += c;
    }
    if (first_sum != last_sum) throw GraphError("first-turn and last-turn counts disagree on conversation count");

    InteractionGraph g;
    g.nodes_.assign(names.begin(), names.end());
    g.adjacency_.resize(g.nodes_.size());
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : edges) {
        if (!seen.emplace(e.from, e.to).second) throw GraphError("duplicate edge " + e.from + " -> " + e.to);
        g.adjacency_[*g.find(e.from)].push_back({*g.find(e.to), e.weight});
    }
    // Node ids follow sorted names, so sorting by id sorts by target name.
    for (auto& adj : g.adjacency_)
        std::sort(adj.begin(), adj.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    g.first_.insert(first.begin(), first.end());
    g.last_.insert(last.begin(), last.end());
    return g;
}

InteractionGraph InteractionGraph::from_sequences(std::span<const std::vector<std::string>> sequences) {
    std::map<std::pair<std::string, std::string>, std::int64_t> counts;
    std::map<std::string, std::int64_t> first, last;
    std::vector<std::string> extra;
    for (const auto& seq : sequences) {
        if (seq.empty()) throw GraphError("cannot build a graph from an empty form sequence");
        ++first[seq.front()];
        ++last[seq.back()];
        for (size_t i = 0; i + 1 < seq.size(); ++i) ++counts[{seq[i], seq[i + 1]}];
        if (seq.size() == 1) extra.push_back(seq.front());
    }
    std::vector<EdgeRecord> edges;
    for (const auto& [key, w] : counts) edges.push_back({key.first, key.second, w});
    return from_parts(std::move(edges), std::move(first), std::move(last), std::move(extra));
}

std::optional<InteractionGraph::NodeId> InteractionGraph::find(std::string_view name) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), name);
    if (it == nodes_.end() || *it != name) return std::nullopt;
    return static_cast<NodeId>(it - nodes_.begin());
}

std::int64_t InteractionGraph::weight(std::string_view from, std::string_view to) const {
    auto f = find(from), t = find(to);
    if (!f || !t) return 0;
    for (const auto& e : adjacency_[*f])
        if (e.to == *t) return e.weight;
    return 0;
}

std::vector<InteractionGraph::EdgeRecord> InteractionGraph::edges() const {
    std::vector<EdgeRecord> out;
    for (NodeId u = 0; u < nodes_.size(); ++u)
        for (const auto& e : adjacency_[u]) out.push_back({nodes_[u], nodes_[e.to], e.weight});
    return out;
}

std::int64_t InteractionGraph::conversation_count() const {
    std::int64_t n = 0;
    for (const auto& [_, c] : first_) n += c;
    return n;
}

std::int64_t InteractionGraph::total_weight() const {
    std::int64_t n = 0;
    for (const auto& adj : adjacency_)
        for (const auto& e : adj) n += e.weight;
    return n;
}

InteractionGraph build_graph(const Corpus& corpus) {
    if (!corpus.annotated()) throw ValidationError("graph construction requires a fully annotated corpus");
    std::vector<std::vector<std::string>> seqs;
    seqs.reserve(corpus.size());
    for (const auto& c : corpus.conversations()) seqs.push_back(canonical_sequence(c));
    return InteractionGraph::from_sequences(seqs);
}

namespace {
std::string argmax_lex(const std::map<std::string, std::int64_t, std::less<>>& counts) {
    std::string best;
    std::int64_t best_count = -1;
    // Map iteration is lexicographic; strict '>' keeps the smallest name on ties.
    for (const auto& [n, c] : counts)
        if (c > best_count) {
            best = n;
            best_count = c;
        }
    return best;
}
} // namespace

Endpoints select_endpoints(const InteractionGraph& graph) {
    if (graph.first_turn_counts().empty() || graph.last_turn_counts().empty())
        throw GraphError("cannot select endpoints of an empty graph");
    return {argmax_lex(graph.first_turn_counts()), argmax_lex(graph.last_turn_counts())};
}

namespace {
std::string dot_quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}
} // namespace

std::string export_dot(const InteractionGraph& graph, const DialogueFlow* highlight) {
    std::set<std::pair<std::string, std::string>> main_edges, branch_edges;
    std::set<std::string> flow_nodes;
    if (highlight) {
        auto add = [&](const std::vector<std::string>& nodes, auto& into) {
            for (const auto& n : nodes) {
                if (!graph.find(n)) throw GraphError("highlighted flow references node absent from graph: \"" + n + "\"");
                flow_nodes.insert(n);
            }
            for (size_t i = 0; i + 1 < nodes.size(); ++i) into.emplace(nodes[i], nodes[i + 1]);
        };
        add(highlight->main.nodes, main_edges);
        for (const auto& d : highlight->digressions) {
            std::vector<std::string> nodes{d.branch_from};
            nodes.insert(nodes.end(), d.path.nodes.begin(), d.path.nodes.end());
            add(nodes, branch_edges);
        }
    }
    std::string out = "digraph interaction {\n";
    for (const auto& n : graph.nodes()) {
        out += "  " + dot_quote(n);
        if (flow_nodes.count(n)) out += " [style=bold]";
        out += ";\n";
    }
    for (const auto& e : graph.edges()) {
        out += "  " + dot_quote(e.from) + " -> " + dot_quote(e.to) + " [label=\"" + std::to_string(e.weight) + "\"";
        if (main_edges.count({e.from, e.to})) out += ", color=\"red\", penwidth=2";
        else if (branch_edges.count({e.from, e.to})) out += ", color=\"blue\", style=dashed, penwidth=2";
        out += "];\n";
    }
    out += "}\n";
    return out;
}

std::string graph_to_json(const InteractionGraph& graph) {
    ordered_json j;
    j["nodes"] = graph.nodes();
    ordered_json edges = ordered_json::array();
    for (const auto& e : graph.edges()) edges.push_back({{"from", e.from}, {"to", e.to}, {"weight", e.weight}});
    j["edges"] = std::move(edges);
    ordered_json first = ordered_json::object(), last = ordered_json::object();
    for (const auto& [n, c] : graph.first_turn_counts()) first[n] = c;
    for (const auto& [n, c] : graph.last_turn_counts()) last[n] = c;
    j["first_turn_counts"] = std::move(first);
    j["last_turn_counts"] = std::move(last);
    return j.dump(2) + "\n";
}

InteractionGraph graph_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(std::string("graph: invalid JSON: ") + e.what());
    }
    auto need = [&](const char* field, bool ok) {
        if (!ok) throw ParseError(std::string("graph field '") + field + "': missing or wrong type");
    };
    need("nodes", j.is_object() && j.contains("nodes") && j["nodes"].is_array());
    need("edges", j.contains("edges") && j["edges"].is_array());
    need("first_turn_counts", j.contains("first_turn_counts") && j["first_turn_counts"].is_object());
    need("last_turn_counts", j.contains("last_turn_counts") && j["last_turn_counts"].is_object());
    std::vector<std::string> nodes;
    for (const auto& n : j["nodes"]) {
        need("nodes", n.is_string());
        nodes.push_back(n.get<std::string>());
    }
    std::vector<InteractionGraph::EdgeRecord> edges;
    for (const auto& e : j["edges"]) {
        need("edges", e.is_object() && e.contains("from") && e["from"].is_string() && e.contains("to") &&
                          e["to"].is_string() && e.contains("weight") && e["weight"].is_number_integer());
        edges.push_back({e["from"].get<std::string>(), e["to"].get<std::string>(), e["weight"].get<std::int64_t>()});
    }
    std::map<std::string, std::int64_t> first, last;
    for (const auto& [k, v] : j["first_turn_counts"].items()) {
        need("first_turn_counts", v.is_number_integer());
        first[k] = v.get<std::int64_t>();
    }
    for (const auto& [k, v] : j["last_turn_counts"].items()) {
        need("last_turn_counts", v.is_number_integer());
        last[k] = v.get<std::int64_t>();
    }
    return InteractionGraph::from_parts(std::move(edges), std::move(first), std::move(last), std::move(nodes));
}

DialoguePath make_path(const InteractionGraph& graph, std::vector<std::string> nodes) {
    DialoguePath p;
    if (nodes.empty()) throw GraphError("empty path");
    for (const auto& n : nodes)
        if (!graph.find(n)) throw GraphError("path node absent from graph: \"" + n + "\"");
    p.bottleneck = nodes.size() > 1 ? std::numeric_limits<std::int64_t>::max() : 0;
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
        std::int64_t w = graph.weight(nodes[i], nodes[i + 1]);
        if (w == 0) throw GraphError("path step is not an edge: \"" + nodes[i] + "\" -> \"" + nodes[i + 1] + "\"");
        p.bottleneck = std::min(p.bottleneck, w);
        p.total_weight += w;
    }
    p.nodes = std::move(nodes);
    return p;
}

} // namespace flowmine
