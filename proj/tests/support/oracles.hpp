#pragma once
// Brute-force reference implementations used to check the library.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------- paths

struct WeightedGraph {
    std::vector<std::string> names;              // node labels
    std::vector<std::vector<std::int64_t>> w;    // w[a][b] > 0 means edge a->b
};

struct Path {
    std::vector<size_t> nodes;
    std::int64_t bottleneck = 0;
    std::int64_t total = 0;
};

// Every simple s->t path by exhaustive DFS.
inline std::vector<Path> all_simple_paths(const WeightedGraph& g, size_t s, size_t t) {
    std::vector<Path> out;
    std::vector<size_t> stack{s};
    std::vector<char> on(g.names.size(), 0);
    on[s] = 1;
    std::function<void(size_t)> dfs = [&](size_t u) {
        if (u == t) {
            Path p;
            p.nodes = stack;
            p.bottleneck = std::numeric_limits<std::int64_t>::max();
            for (size_t k = 0; k + 1 < stack.size(); ++k) {
                std::int64_t x = g.w[stack[k]][stack[k + 1]];
                p.bottleneck = std::min(p.bottleneck, x);
                p.total += x;
            }
            if (stack.size() == 1) p.bottleneck = 0;
            out.push_back(p);
            return;
        }
        for (size_t v = 0; v < g.names.size(); ++v) {
            if (g.w[u][v] <= 0 || on[v]) continue;
            on[v] = 1;
            stack.push_back(v);
            dfs(v);
            stack.pop_back();
            on[v] = 0;
        }
    };
    dfs(s);
    return out;
}

inline std::vector<std::string> labels(const WeightedGraph& g, const Path& p) {
    std::vector<std::string> out;
    for (size_t v : p.nodes) out.push_back(g.names[v]);
    return out;
}

// Picks the best path under a strict "a is better than b" relation; the
// relation is completed with the lexicographic label sequence.
inline std::optional<Path> best_path(const WeightedGraph& g, const std::vector<Path>& paths,
                                     const std::function<int(const Path&, const Path&)>& cmp) {
    std::optional<Path> best;
    for (const auto& p : paths) {
        if (!best) {
            best = p;
            continue;
        }
        int c = cmp(p, *best);
        if (c > 0 || (c == 0 && labels(g, p) < labels(g, *best))) best = p;
    }
    return best;
}

template <typename T>
int three_way(T a, T b) {
    return a < b ? -1 : (a > b ? 1 : 0);
}

// Widest: bottleneck, then total weight, then fewer nodes.
inline int widest_cmp(const Path& a, const Path& b) {
    if (int c = three_way(a.bottleneck, b.bottleneck)) return c;
    if (int c = three_way(a.total, b.total)) return c;
    return three_way(b.nodes.size(), a.nodes.size());
}

// Longest: node count, then total weight.
inline int longest_cmp(const Path& a, const Path& b) {
    if (int c = three_way(a.nodes.size(), b.nodes.size())) return c;
    return three_way(a.total, b.total);
}

// Max weight: total weight, then fewer nodes.
inline int maxweight_cmp(const Path& a, const Path& b) {
    if (int c = three_way(a.total, b.total)) return c;
    return three_way(b.nodes.size(), a.nodes.size());
}

// ---------------------------------------------------------------- sequences

using Tokens = std::vector<std::string>;

// Multiset of n-grams of one order.
inline std::map<Tokens, int> ngram_counts(const Tokens& x, size_t n) {
    std::map<Tokens, int> out;
    if (x.size() < n) return out;
    for (size_t i = 0; i + n <= x.size(); ++i) out[Tokens(x.begin() + i, x.begin() + i + n)]++;
    return out;
}

// Sentence BLEU with order min(4, |hyp|), add-one smoothing on orders without
// matches, brevity penalty, percent scale.
inline double bleu(const Tokens& hyp, const Tokens& ref) {
    size_t order = std::min<size_t>(4, hyp.size());
    double log_sum = 0.0;
    for (size_t n = 1; n <= order; ++n) {
        auto h = ngram_counts(hyp, n);
        auto r = ngram_counts(ref, n);
        double matched = 0.0, total = 0.0;
        for (const auto& [gram, count] : h) {
            total += count;
            auto it = r.find(gram);
            if (it != r.end()) matched += std::min(count, it->second);
        }
        if (matched == 0.0) {
            matched += 1.0;
            total += 1.0;
        }
        log_sum += std::log(matched / total);
    }
    double bp = hyp.size() < ref.size() ? std::exp(1.0 - double(ref.size()) / double(hyp.size())) : 1.0;
    return 100.0 * bp * std::exp(log_sum / double(order));
}

// Longest common subsequence by enumerating subsets of the first sequence and
// checking embeddability into the second with greedy earliest matching.
inline size_t lcs_brute(size_t m, size_t n, const std::function<bool(size_t, size_t)>& match) {
    size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        size_t bits = static_cast<size_t>(__builtin_popcount(mask));
        if (bits <= best) continue;
        size_t j = 0;
        bool ok = true;
        for (size_t i = 0; i < m && ok; ++i) {
            if (!(mask >> i & 1u)) continue;
            while (j < n && !match(i, j)) ++j;
            if (j == n) ok = false;
            else ++j;
        }
        if (ok) best = bits;
    }
    return best;
}

inline size_t lcs_tokens(const Tokens& a, const Tokens& b) {
    return lcs_brute(a.size(), b.size(), [&](size_t i, size_t j) { return a[i] == b[j]; });
}

inline double rouge_l(const Tokens& hyp, const Tokens& ref) {
    double l = double(lcs_tokens(hyp, ref));
    if (l == 0.0) return 0.0;
    double p = l / double(hyp.size()), r = l / double(ref.size());
    return 100.0 * 2.0 * p * r / (p + r);
}

// METEOR-lite alignment: repeatedly link the longest run of identical unlinked
// tokens (leftmost in the hypothesis, then in the reference).
struct Alignment {
    size_t matches = 0;
    size_t chunks = 0;
};

inline Alignment meteor_alignment(const Tokens& hyp, const Tokens& ref) {
    std::vector<std::optional<size_t>> link(hyp.size());
    std::vector<char> used(ref.size(), 0);
    for (;;) {
        size_t best = 0, bi = 0, bj = 0;
        for (size_t i = 0; i < hyp.size(); ++i)
            for (size_t j = 0; j < ref.size(); ++j) {
                size_t len = 0;
                while (i + len < hyp.size() && j + len < ref.size() && !link[i + len] && !used[j + len] &&
                       hyp[i + len] == ref[j + len])
                    ++len;
                if (len > best) {
                    best = len;
                    bi = i;
                    bj = j;
                }
            }
        if (best == 0) break;
        for (size_t k = 0; k < best; ++k) {
            link[bi + k] = bj + k;
            used[bj + k] = 1;
        }
    }
    Alignment a;
    for (size_t i = 0; i < hyp.size(); ++i) {
        if (!link[i]) continue;
        ++a.matches;
        bool continues = i > 0 && link[i - 1] && *link[i - 1] + 1 == *link[i];
        if (!continues) ++a.chunks;
    }
    return a;
}

inline double meteor(const Tokens& hyp, const Tokens& ref) {
    auto a = meteor_alignment(hyp, ref);
    if (a.matches == 0) return 0.0;
    double m = double(a.matches);
    double p = m / double(hyp.size()), r = m / double(ref.size());
    double fmean = 10.0 * p * r / (r + 9.0 * p);
    double frag = double(a.chunks) / m;
    return 100.0 * fmean * (1.0 - 0.5 * frag * frag * frag);
}

// ---------------------------------------------------------------- clustering

enum class Link { Single, Complete, Average };

// Naive agglomeration: every step recomputes all cluster-pair linkages from
// the point distances. Ties (within tol of the minimum) go to the pair with
// the smallest (min member, min member) key.
inline std::vector<std::vector<size_t>> agglomerate(const std::vector<std::vector<double>>& d, double threshold,
                                                    Link link, double tol = 1e-12) {
    std::vector<std::vector<size_t>> clusters;
    for (size_t i = 0; i < d.size(); ++i) clusters.push_back({i});
    auto linkage = [&](const std::vector<size_t>& a, const std::vector<size_t>& b) {
        double best = link == Link::Single ? std::numeric_limits<double>::infinity() : 0.0;
        double sum = 0.0;
        for (size_t x : a)
            for (size_t y : b) {
                if (link == Link::Single) best = std::min(best, d[x][y]);
                else if (link == Link::Complete) best = std::max(best, d[x][y]);
                sum += d[x][y];
            }
        return link == Link::Average ? sum / double(a.size() * b.size()) : best;
    };
    while (clusters.size() > 1) {
        double lo = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> l(clusters.size(), std::vector<double>(clusters.size()));
        for (size_t a = 0; a < clusters.size(); ++a)
            for (size_t b = a + 1; b < clusters.size(); ++b) {
                l[a][b] = linkage(clusters[a], clusters[b]);
                lo = std::min(lo, l[a][b]);
            }
        if (lo > threshold) break;
        std::pair<size_t, size_t> key{SIZE_MAX, SIZE_MAX}, pick{0, 0};
        for (size_t a = 0; a < clusters.size(); ++a)
            for (size_t b = a + 1; b < clusters.size(); ++b) {
                if (l[a][b] > lo + tol) continue;
                std::pair<size_t, size_t> k{std::min(clusters[a][0], clusters[b][0]),
                                            std::max(clusters[a][0], clusters[b][0])};
                if (k < key) {
                    key = k;
                    pick = {a, b};
                }
            }
        auto& a = clusters[pick.first];
        a.insert(a.end(), clusters[pick.second].begin(), clusters[pick.second].end());
        std::sort(a.begin(), a.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(pick.second));
    }
    std::sort(clusters.begin(), clusters.end());
    return clusters;
}

} // namespace oracle
