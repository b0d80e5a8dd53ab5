#include "flowmine/extractor.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <queue>
#include <unordered_map>

#include "flowmine/error.hpp"

namespace flowmine {

void ExtractorConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must be in (0, 1]");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw ValidationError("kappa must be in (0, 1]");
    if (max_path_nodes == 0) throw ValidationError("max_path_nodes must be positive");
    if (max_search_states == 0) throw ValidationError("max_search_states must be positive");
}

namespace {

using NodeId = InteractionGraph::NodeId;

NodeId require_node(const InteractionGraph& g, std::string_view name) {
    auto id = g.find(name);
    if (!id) throw GraphError("node absent from graph: \"" + std::string(name) + "\"");
    return *id;
}

[[noreturn]] void unreachable(const InteractionGraph& g, NodeId s, NodeId t) {
    throw GraphError("\"" + g.name(t) + "\" is unreachable from \"" + g.name(s) + "\"");
}

// Lexicographic (primary, secondary) objective, larger is better.
struct Score {
    std::int64_t primary = 0;
    std::int64_t secondary = 0;
    auto operator<=>(const Score&) const = default;
    Score operator+(const Score& o) const { return {primary + o.primary, secondary + o.secondary}; }
};

enum class Objective { Longest, MaxWeight };

// Exact best simple s->t path under an additive objective. Memoizes on
// (node, visited set within the node's strongly connected component): nodes
// in earlier components can never be revisited, so that set is the only part
// of the history that constrains the future.
class SimplePathSearch {
public:
    SimplePathSearch(const InteractionGraph& g, NodeId s, NodeId t, std::int64_t min_weight, Objective obj,
                     const ExtractorConfig& cfg)
        : g_(g), s_(s), t_(t), min_weight_(min_weight), obj_(obj), cfg_(cfg) {}

    std::vector<std::string> run() {
        prune();
        if (!keep_[s_] || !keep_[t_]) unreachable(g_, s_, t_);
        components();
        Mask start = bit(s_);
        auto best = solve(s_, start, 1);
        if (!best) unreachable(g_, s_, t_);
        std::vector<std::string> path{g_.name(s_)};
        NodeId v = s_;
        Mask mask = start;
        Score remaining = *best;
        while (v != t_) {
            bool stepped = false;
            for (const auto& e : g_.out_edges(v)) {
                if (!usable(v, e)) continue;
                Mask next;
                if (!advance(v, e.to, mask, next)) continue;
                auto rest = solve(e.to, next, path.size() + 1);
                if (rest && step(e) + *rest == remaining) {
                    remaining = *rest;
                    v = e.to;
                    mask = std::move(next);
                    path.push_back(g_.name(v));
                    stepped = true;
                    break;
                }
            }
            if (!stepped) throw GraphError("internal error reconstructing path");
        }
        return path;
    }

private:
    using Mask = std::vector<std::uint64_t>;
    struct MaskHash {
        size_t operator()(const Mask& m) const {
            size_t h = 1469598103934665603ull;
            for (auto w : m) h = (h ^ w) * 1099511628211ull;
            return h;
        }
    };

    bool usable(NodeId from, const InteractionGraph::Edge& e) const {
        return e.to != from && e.weight >= min_weight_ && keep_[e.to] && from != t_;
    }

    Score step(const InteractionGraph::Edge& e) const {
        return obj_ == Objective::Longest ? Score{1, e.weight} : Score{e.weight, -1};
    }

    // Forward reachability from s (never leaving t) intersected with backward reachability to t.
    void prune() {
        size_t n = g_.node_count();
        std::vector<char> fwd(n, 0), bwd(n, 0);
        std::vector<std::vector<NodeId>> rev(n);
        for (NodeId u = 0; u < n; ++u)
            for (const auto& e : g_.out_edges(u))
                if (e.to != u && e.weight >= min_weight_ && u != t_) rev[e.to].push_back(u);
        std::vector<NodeId> stack{s_};
        fwd[s_] = 1;
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            if (u == t_) continue;
            for (const auto& e : g_.out_edges(u))
                if (e.to != u && e.weight >= min_weight_ && !fwd[e.to]) {
                    fwd[e.to] = 1;
                    stack.push_back(e.to);
                }
        }
        stack = {t_};
        bwd[t_] = 1;
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            for (NodeId p : rev[u])
                if (!bwd[p]) {
                    bwd[p] = 1;
                    stack.push_back(p);
                }
        }
        keep_.assign(n, 0);
        for (NodeId u = 0; u < n; ++u) keep_[u] = fwd[u] && bwd[u];
    }

    // Iterative Tarjan SCC over kept nodes and usable edges.
    void components() {
        size_t n = g_.node_count();
        comp_.assign(n, -1);
        local_.assign(n, 0);
        std::vector<int> index(n, -1), low(n, 0);
        std::vector<char> on_stack(n, 0);
        std::vector<NodeId> stack;
        int counter = 0;
        for (NodeId root = 0; root < n; ++root) {
            if (!keep_[root] || index[root] >= 0) continue;
            std::vector<std::pair<NodeId, size_t>> frames{{root, 0}};
            index[root] = low[root] = counter++;
            stack.push_back(root);
            on_stack[root] = 1;
            while (!frames.empty()) {
                auto& [u, i] = frames.back();
                auto edges = g_.out_edges(u);
                if (i < edges.size()) {
                    const auto& e = edges[i++];
                    if (!usable(u, e)) continue;
                    NodeId w = e.to;
                    if (index[w] < 0) {
                        index[w] = low[w] = counter++;
                        stack.push_back(w);
                        on_stack[w] = 1;
                        frames.emplace_back(w, 0);
                    } else if (on_stack[w]) {
                        low[u] = std::min(low[u], index[w]);
                    }
                    continue;
                }
                NodeId done = u;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().first] = std::min(low[frames.back().first], low[done]);
                if (low[done] == index[done]) {
                    int id = static_cast<int>(comp_size_.size());
                    size_t size = 0;
                    NodeId w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp_[w] = id;
                        local_[w] = static_cast<std::uint32_t>(size++);
                    } while (w != done);
                    comp_size_.push_back(size);
                }
            }
        }
        memo_.resize(n);
    }

    Mask bit(NodeId v) const {
        Mask m((comp_size_[comp_[v]] + 63) / 64, 0);
        m[local_[v] / 64] |= std::uint64_t{1} << (local_[v] % 64);
        return m;
    }

    bool advance(NodeId from, NodeId to, const Mask& mask, Mask& next) const {
        if (comp_[to] != comp_[from]) {
            next = bit(to);
            return true;
        }
        std::uint64_t b = std::uint64_t{1} << (local_[to] % 64);
        if (mask[local_[to] / 64] & b) return false;
        next = mask;
        next[local_[to] / 64] |= b;
        return true;
    }

    std::optional<Score> solve(NodeId v, const Mask& mask, size_t depth) {
        if (depth > cfg_.max_path_nodes)
            throw BoundError("simple-path search exceeded max_path_nodes = " + std::to_string(cfg_.max_path_nodes));
        if (v == t_) return Score{};
        auto& table = memo_[v];
        if (auto it = table.find(mask); it != table.end()) return it->second;
        if (++states_ > cfg_.max_search_states)
            throw BoundError("simple-path search exceeded max_search_states = " +
                             std::to_string(cfg_.max_search_states));
        std::optional<Score> best;
        for (const auto& e : g_.out_edges(v)) {
            if (!usable(v, e)) continue;
            Mask next;
            if (!advance(v, e.to, mask, next)) continue;
            auto rest = solve(e.to, next, depth + 1);
            if (!rest) continue;
            Score cand = step(e) + *rest;
            if (!best || cand > *best) best = cand;
        }
        memo_[v].emplace(mask, best);
        return best;
    }

    const InteractionGraph& g_;
    NodeId s_, t_;
    std::int64_t min_weight_;
    Objective obj_;
    const ExtractorConfig& cfg_;
    std::vector<char> keep_;
    std::vector<int> comp_;
    std::vector<std::uint32_t> local_;
    std::vector<size_t> comp_size_;
    std::vector<std::unordered_map<Mask, std::optional<Score>, MaskHash>> memo_;
    size_t states_ = 0;
};

// Max-min Dijkstra: the largest achievable bottleneck from s to t.
std::int64_t widest_bottleneck(const InteractionGraph& g, NodeId s, NodeId t) {
    constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
    std::vector<std::int64_t> width(g.node_count(), -1);
    std::priority_queue<std::pair<std::int64_t, NodeId>> pq;
    width[s] = kInf;
    pq.emplace(kInf, s);
    while (!pq.empty()) {
        auto [w, u] = pq.top();
        pq.pop();
        if (w < width[u]) continue;
        if (u == t) break;
        for (const auto& e : g.out_edges(u)) {
            if (e.to == u) continue;
            std::int64_t nw = std::min(w, e.weight);
            if (nw > width[e.to]) {
                width[e.to] = nw;
                pq.emplace(nw, e.to);
            }
        }
    }
    if (width[t] < 0) unreachable(g, s, t);
    return width[t];
}

DialoguePath search(const InteractionGraph& g, std::string_view s, std::string_view t, std::int64_t min_weight,
                    Objective obj, const ExtractorConfig& cfg) {
    NodeId sid = require_node(g, s), tid = require_node(g, t);
    if (sid == tid) return make_path(g, {g.name(sid)});
    SimplePathSearch engine(g, sid, tid, min_weight, obj, cfg);
    return make_path(g, engine.run());
}

} // namespace

DialoguePath widest_path(const InteractionGraph& graph, std::string_view s, std::string_view t,
                         const ExtractorConfig& cfg) {
    NodeId sid = require_node(graph, s), tid = require_node(graph, t);
    if (sid == tid) return make_path(graph, {graph.name(sid)});
    std::int64_t best = widest_bottleneck(graph, sid, tid);
    // Among paths achieving the optimal bottleneck, the tie-break is exactly a
    // max-weight search restricted to edges no lighter than that bottleneck.
    return search(graph, s, t, best, Objective::MaxWeight, cfg);
}

DialoguePath longest_simple_path(const InteractionGraph& graph, std::string_view s, std::string_view t,
                                 const ExtractorConfig& cfg) {
    return search(graph, s, t, 1, Objective::Longest, cfg);
}

DialoguePath max_weight_simple_path(const InteractionGraph& graph, std::string_view s, std::string_view t,
                                    const ExtractorConfig& cfg) {
    return search(graph, s, t, 1, Objective::MaxWeight, cfg);
}

namespace {
std::string joined(const std::vector<std::string>& nodes, size_t from) {
    std::string out;
    for (size_t i = from; i < nodes.size(); ++i) {
        if (i > from) out += ' ';
        out += nodes[i];
    }
    return out;
}
} // namespace

DigressionSearch find_digressions(const InteractionGraph& graph, const DialoguePath& main, const ExtractorConfig& cfg,
                                  EmbeddingCache& cache, EmbeddingProvider* provider) {
    cfg.validate();
    make_path(graph, main.nodes);
    DigressionSearch result;
    if (main.nodes.size() < 2) return result;
    const std::string& target = main.nodes.back();

    struct Candidate {
        size_t index;
        std::string head;
    };
    std::vector<Candidate> candidates;
    std::vector<std::string> texts;
    for (size_t i = 0; i + 1 < main.nodes.size(); ++i) {
        NodeId u = *graph.find(main.nodes[i]);
        for (const auto& e : graph.out_edges(u)) {
            const std::string& head = graph.name(e.to);
            if (e.to == u || head == main.nodes[i + 1]) continue;
            candidates.push_back({i, head});
            texts.push_back(main.nodes[i + 1]);
            texts.push_back(head);
        }
    }
    if (candidates.empty()) return result;
    auto vecs = cache.get_all(texts, provider);

    struct Pending {
        size_t index;
        std::string head;
        double candidate_similarity;
        DialoguePath fragment;
    };
    std::vector<Pending> pending;
    std::vector<std::string> path_texts;
    for (size_t c = 0; c < candidates.size(); ++c) {
        double sim = cosine_similarity(vecs[2 * c], vecs[2 * c + 1]);
        if (!(sim < cfg.epsilon)) continue;
        DialoguePath fragment;
        try {
            fragment = widest_path(graph, candidates[c].head, target, cfg);
        } catch (const BoundError&) {
            throw;
        } catch (const GraphError&) {
            result.dropped.push_back(candidates[c].head);
            continue;
        }
        path_texts.push_back(joined(main.nodes, candidates[c].index + 1));
        path_texts.push_back(joined(fragment.nodes, 0));
        pending.push_back({candidates[c].index, candidates[c].head, sim, std::move(fragment)});
    }
    if (pending.empty()) return result;
    auto path_vecs = cache.get_all(path_texts, provider);

    std::vector<std::pair<size_t, Digression>> kept;
    for (size_t p = 0; p < pending.size(); ++p) {
        double psim = cosine_similarity(path_vecs[2 * p], path_vecs[2 * p + 1]);
        if (!(psim < cfg.kappa)) continue;
        Digression d;
        d.branch_from = main.nodes[pending[p].index];
        d.branch_head = pending[p].head;
        d.path = std::move(pending[p].fragment);
        d.candidate_similarity = pending[p].candidate_similarity;
        d.path_similarity = psim;
        kept.emplace_back(pending[p].index, std::move(d));
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        const Digression& x = a.second;
        const Digression& y = b.second;
        if (x.path.bottleneck != y.path.bottleneck) return x.path.bottleneck > y.path.bottleneck;
        if (x.path_similarity != y.path_similarity) return x.path_similarity < y.path_similarity;
        if (x.branch_head != y.branch_head) return x.branch_head < y.branch_head;
        return a.first < b.first;
    });
    for (auto& [_, d] : kept) result.digressions.push_back(std::move(d));
    return result;
}

DialogueFlow assemble_flow(DialoguePath main, const std::vector<Digression>& digressions, size_t k,
                           std::string method_tag) {
    DialogueFlow flow;
    flow.main = std::move(main);
    flow.method_tag = std::move(method_tag);
    size_t n = std::min(k, digressions.size());
    flow.digressions.assign(digressions.begin(), digressions.begin() + static_cast<std::ptrdiff_t>(n));
    return flow;
}

} // namespace flowmine
