#include "flowmine/normalizer.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <set>

#include "flowmine/error.hpp"
#include "json_util.hpp"

namespace flowmine {

using detail::ordered_json;

std::string_view linkage_name(Linkage linkage) {
    switch (linkage) {
    case Linkage::Average: return "average";
    case Linkage::Complete: return "complete";
    case Linkage::Single: return "single";
    }
    return "average";
}

Linkage parse_linkage(std::string_view name) {
    if (name == "average") return Linkage::Average;
    if (name == "complete") return Linkage::Complete;
    if (name == "single") return Linkage::Single;
    throw ConfigError("unknown linkage \"" + std::string(name) + "\" (expected average, complete or single)");
}

void NormalizerConfig::validate() const {
    if (!(user_threshold > 0.0)) throw ValidationError("user_threshold must be positive");
    if (!(agent_threshold > 0.0)) throw ValidationError("agent_threshold must be positive");
}

std::vector<std::vector<size_t>> agglomerate(const std::vector<std::vector<double>>& distances, double threshold,
                                             Linkage linkage) {
    const size_t n = distances.size();
    for (const auto& row : distances)
        if (row.size() != n) throw ValidationError("distance matrix must be square");
    if (!(threshold > 0.0)) throw ValidationError("clustering threshold must be positive");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // Cluster ids are the smallest member index; d is kept for i < j only.
    std::vector<std::vector<double>> d = distances;
    std::vector<char> active(n, 1);
    std::vector<size_t> size(n, 1);
    std::vector<std::vector<size_t>> members(n);
    for (size_t i = 0; i < n; ++i) members[i] = {i};
    std::vector<double> row_min(n, kInf);

    auto recompute_row = [&](size_t i) {
        double m = kInf;
        for (size_t j = i + 1; j < n; ++j)
            if (active[j]) m = std::min(m, d[i][j]);
        row_min[i] = m;
    };
    for (size_t i = 0; i < n; ++i) recompute_row(i);

    for (size_t remaining = n; remaining > 1; --remaining) {
        double best = kInf;
        for (size_t i = 0; i < n; ++i)
            if (active[i]) best = std::min(best, row_min[i]);
        if (!(best <= threshold)) break;
        size_t a = n, b = n;
        for (size_t i = 0; i < n && a == n; ++i) {
            if (!active[i] || row_min[i] > best + kLinkageTieTolerance) continue;
            for (size_t j = i + 1; j < n; ++j)
                if (active[j] && d[i][j] <= best + kLinkageTieTolerance) {
                    a = i;
                    b = j;
                    break;
                }
        }
        // a < b; b folds into a. Rows other than a only need a rescan when
        // their cached minimum came from a or b.
        std::vector<char> stale(n, 0);
        for (size_t c = 0; c < n; ++c) {
            if (!active[c] || c == a || c == b) continue;
            double dac = c < a ? d[c][a] : d[a][c];
            double dbc = c < b ? d[c][b] : d[b][c];
            if (c < b && (dbc == row_min[c] || (c < a && dac == row_min[c]))) stale[c] = 1;
            double merged = 0.0;
            switch (linkage) {
            case Linkage::Single: merged = std::min(dac, dbc); break;
            case Linkage::Complete: merged = std::max(dac, dbc); break;
            case Linkage::Average:
                merged = (static_cast<double>(size[a]) * dac + static_cast<double>(size[b]) * dbc) /
                         static_cast<double>(size[a] + size[b]);
                break;
            }
            if (c < a) {
                d[c][a] = merged;
                if (!stale[c]) row_min[c] = std::min(row_min[c], merged);
            } else {
                d[a][c] = merged;
            }
        }
        active[b] = 0;
        row_min[b] = kInf;
        size[a] += size[b];
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        std::sort(members[a].begin(), members[a].end());
        members[b].clear();
        recompute_row(a);
        for (size_t c = 0; c < n; ++c)
            if (stale[c]) recompute_row(c);
    }

    std::vector<std::vector<size_t>> out;
    for (size_t i = 0; i < n; ++i)
        if (active[i]) out.push_back(members[i]);
    return out;
}

ClusterAssignment cluster_forms(SpeakerRole role, const std::map<std::string, size_t>& forms, double threshold,
                                Linkage linkage, EmbeddingCache& cache, EmbeddingProvider* provider) {
    ClusterAssignment out;
    out.role = role;
    if (forms.empty()) return out;
    std::vector<std::string> names;
    for (const auto& [f, _] : forms) names.push_back(f);
    auto vecs = cache.get_all(names, provider);
    const size_t n = names.size();
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = euclidean_distance(vecs[i], vecs[j]);
    for (const auto& group : agglomerate(dist, threshold, linkage)) {
        FormCluster cluster;
        size_t best_freq = 0;
        for (size_t idx : group) {
            size_t freq = forms.at(names[idx]);
            cluster.members.push_back({names[idx], freq});
            // Indices ascend lexicographically, so strict '>' keeps the smallest form on ties.
            if (cluster.representative.empty() || freq > best_freq) {
                cluster.representative = names[idx];
                best_freq = freq;
            }
        }
        out.clusters.push_back(std::move(cluster));
    }
    return out;
}

void NormalizationMap::add(SpeakerRole role, const std::string& form, const std::string& representative) {
    if (!entries_.emplace(std::make_pair(role, form), representative).second)
        throw ValidationError("form \"" + form + "\" (" + std::string(role_name(role)) +
                              ") appears in more than one cluster");
}

std::optional<std::string> NormalizationMap::lookup(SpeakerRole role, std::string_view form) const {
    auto it = entries_.find(std::make_pair(role, std::string(form)));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

NormalizationMap build_normalization_map(const std::vector<ClusterAssignment>& assignments) {
    NormalizationMap map;
    for (const auto& a : assignments) {
        for (const auto& c : a.clusters) {
            bool rep_member = false;
            for (const auto& m : c.members) rep_member |= m.form == c.representative;
            if (!rep_member)
                throw ValidationError("representative \"" + c.representative + "\" is not a member of its cluster");
            for (const auto& m : c.members) map.add(a.role, m.form, c.representative);
        }
    }
    return map;
}

Corpus apply_normalization(const Corpus& corpus, const NormalizationMap& map) {
    if (!corpus.annotated()) throw ValidationError("normalization requires a fully annotated corpus");
    std::vector<Conversation> out = corpus.conversations();
    for (auto& conv : out) {
        for (auto& turn : conv.turns) {
            std::string form = prefixed_form(turn.role, *turn.canonical_form);
            auto rep = map.lookup(turn.role, form);
            if (!rep)
                throw ValidationError("form \"" + form + "\" (" + std::string(role_name(turn.role)) +
                                      ") is missing from the normalization map");
            turn.canonical_form = *rep;
        }
    }
    return Corpus(std::move(out));
}

std::map<std::string, size_t> collect_forms(const Corpus& corpus, SpeakerRole role) {
    std::map<std::string, size_t> out;
    for (const auto& conv : corpus.conversations()) {
        auto seq = canonical_sequence(conv);
        for (size_t i = 0; i < conv.turns.size(); ++i)
            if (conv.turns[i].role == role) ++out[seq[i]];
    }
    return out;
}

Normalization fit_normalization(const Corpus& corpus, const NormalizerConfig& cfg, EmbeddingCache& cache,
                                EmbeddingProvider* provider) {
    cfg.validate();
    if (!corpus.annotated()) throw ValidationError("normalization requires a fully annotated corpus");
    auto user_forms = collect_forms(corpus, SpeakerRole::User);
    auto agent_forms = collect_forms(corpus, SpeakerRole::Agent);
    // Fetch every embedding up front so the parallel clusterings only read the cache.
    std::vector<std::string> all;
    for (const auto& [f, _] : user_forms) all.push_back(f);
    for (const auto& [f, _] : agent_forms) all.push_back(f);
    if (!all.empty()) cache.get_all(all, provider);
    auto user = std::async(std::launch::async, [&] {
        return cluster_forms(SpeakerRole::User, user_forms, cfg.user_threshold, cfg.linkage, cache, provider);
    });
    ClusterAssignment agent =
        cluster_forms(SpeakerRole::Agent, agent_forms, cfg.agent_threshold, cfg.linkage, cache, provider);
    Normalization out;
    out.user = user.get();
    out.agent = std::move(agent);
    out.map = build_normalization_map({out.user, out.agent});
    return out;
}

namespace {
ordered_json assignment_json(const ClusterAssignment& a) {
    ordered_json clusters = ordered_json::array();
    for (const auto& c : a.clusters) {
        ordered_json jc;
        jc["representative"] = c.representative;
        ordered_json members = ordered_json::array();
        for (const auto& m : c.members) members.push_back({{"form", m.form}, {"frequency", m.frequency}});
        jc["members"] = std::move(members);
        clusters.push_back(std::move(jc));
    }
    return clusters;
}
} // namespace

std::string clusters_to_json(const Normalization& normalization) {
    ordered_json j;
    j["user"] = assignment_json(normalization.user);
    j["agent"] = assignment_json(normalization.agent);
    return j.dump(2) + "\n";
}

std::string normalization_map_to_json(const NormalizationMap& map) {
    ordered_json j;
    ordered_json user = ordered_json::object(), agent = ordered_json::object();
    for (const auto& [key, rep] : map.entries()) (key.first == SpeakerRole::User ? user : agent)[key.second] = rep;
    j["user"] = std::move(user);
    j["agent"] = std::move(agent);
    return j.dump(2) + "\n";
}

} // namespace flowmine
