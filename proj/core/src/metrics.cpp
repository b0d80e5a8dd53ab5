#include "flowmine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include "flowmine/error.hpp"
#include "json_util.hpp"
#include "text.hpp"

namespace flowmine {

using detail::ordered_json;

TokenSequence tokenize(std::string_view text) { return detail::split_whitespace(detail::to_lower(text)); }

TokenSequence tokenize_forms(const std::vector<std::string>& forms) {
    TokenSequence out;
    for (const auto& f : forms)
        for (auto& t : tokenize(f)) out.push_back(std::move(t));
    return out;
}

std::vector<std::string> flow_flat_forms(const DialogueFlow& flow) {
    std::vector<std::string> forms = flow.main.nodes;
    for (const auto& d : flow.digressions) {
        forms.push_back(d.branch_from);
        forms.insert(forms.end(), d.path.nodes.begin(), d.path.nodes.end());
    }
    return forms;
}

TokenSequence flow_token_sequence(const DialogueFlow& flow) { return tokenize_forms(flow_flat_forms(flow)); }

std::vector<std::vector<std::string>> flow_linearizations(const DialogueFlow& flow) {
    const auto& main = flow.main.nodes;
    std::vector<std::vector<std::string>> out{main};
    for (const auto& d : flow.digressions) {
        auto at = std::find(main.begin(), main.end(), d.branch_from);
        if (at == main.end()) throw ValidationError("digression branches from \"" + d.branch_from + "\", not on main path");
        size_t i = static_cast<size_t>(at - main.begin());
        std::vector<std::string> lin(main.begin(), main.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        // Follow the branch until it meets a later main-path step, then finish along the main path.
        for (const auto& node : d.path.nodes) {
            auto later = std::find(main.begin() + static_cast<std::ptrdiff_t>(i) + 1, main.end(), node);
            if (later != main.end()) {
                lin.insert(lin.end(), later, main.end());
                break;
            }
            lin.push_back(node);
        }
        out.push_back(std::move(lin));
    }
    return out;
}

namespace {

void require_nonempty(const TokenSequence& hyp, const TokenSequence& ref, const char* metric) {
    if (hyp.empty() || ref.empty()) throw ValidationError(std::string(metric) + " requires non-empty sequences");
}

std::map<std::vector<std::string>, size_t> ngram_counts(const TokenSequence& seq, size_t n) {
    std::map<std::vector<std::string>, size_t> out;
    for (size_t i = 0; i + n <= seq.size(); ++i) ++out[std::vector<std::string>(seq.begin() + i, seq.begin() + i + n)];
    return out;
}

} // namespace

double bleu(const TokenSequence& hyp, const TokenSequence& ref) {
    require_nonempty(hyp, ref, "bleu");
    const size_t order = std::min<size_t>(4, hyp.size());
    double log_sum = 0.0;
    for (size_t n = 1; n <= order; ++n) {
        auto h = ngram_counts(hyp, n);
        auto r = ngram_counts(ref, n);
        double matches = 0.0;
        for (const auto& [gram, count] : h) {
            auto it = r.find(gram);
            if (it != r.end()) matches += static_cast<double>(std::min(count, it->second));
        }
        double total = static_cast<double>(hyp.size() - n + 1);
        if (matches == 0.0) {
            matches = 1.0;
            total += 1.0;
        }
        log_sum += std::log(matches / total);
    }
    double bp = hyp.size() < ref.size()
                    ? std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()))
                    : 1.0;
    return 100.0 * bp * std::exp(log_sum / static_cast<double>(order));
}

size_t lcs_length(size_t m, size_t n, const std::function<bool(size_t, size_t)>& match) {
    std::vector<size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (size_t i = 1; i <= m; ++i) {
        for (size_t j = 1; j <= n; ++j)
            cur[j] = match(i - 1, j - 1) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[n];
}

double rouge_l(const TokenSequence& hyp, const TokenSequence& ref) {
    require_nonempty(hyp, ref, "rouge_l");
    size_t l = lcs_length(hyp.size(), ref.size(), [&](size_t i, size_t j) { return hyp[i] == ref[j]; });
    if (l == 0) return 0.0;
    double p = static_cast<double>(l) / static_cast<double>(hyp.size());
    double r = static_cast<double>(l) / static_cast<double>(ref.size());
    return 100.0 * 2.0 * p * r / (p + r);
}

MeteorAlignment meteor_alignment(const TokenSequence& hyp, const TokenSequence& ref) {
    const size_t m = hyp.size(), n = ref.size();
    std::vector<char> used_h(m, 0), used_r(n, 0);
    std::vector<std::pair<size_t, size_t>> links;
    std::vector<std::vector<size_t>> run(m + 1, std::vector<size_t>(n + 1, 0));
    while (true) {
        size_t best = 0, bi = 0, bj = 0;
        for (size_t i = m; i-- > 0;)
            for (size_t j = n; j-- > 0;)
                run[i][j] = (!used_h[i] && !used_r[j] && hyp[i] == ref[j]) ? run[i + 1][j + 1] + 1 : 0;
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j)
                if (run[i][j] > best) {
                    best = run[i][j];
                    bi = i;
                    bj = j;
                }
        if (best == 0) break;
        for (size_t k = 0; k < best; ++k) {
            used_h[bi + k] = used_r[bj + k] = 1;
            links.emplace_back(bi + k, bj + k);
        }
    }
    MeteorAlignment out;
    out.matches = links.size();
    if (links.empty()) return out;
    std::sort(links.begin(), links.end());
    out.chunks = 1;
    for (size_t k = 1; k < links.size(); ++k)
        if (links[k].first != links[k - 1].first + 1 || links[k].second != links[k - 1].second + 1) ++out.chunks;
    return out;
}

double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref) {
    require_nonempty(hyp, ref, "meteor_lite");
    auto a = meteor_alignment(hyp, ref);
    if (a.matches == 0) return 0.0;
    double m = static_cast<double>(a.matches);
    double p = m / static_cast<double>(hyp.size());
    double r = m / static_cast<double>(ref.size());
    double fmean = 10.0 * p * r / (r + 9.0 * p);
    double penalty = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3.0);
    return 100.0 * fmean * (1.0 - penalty);
}

size_t lcs_exact(const std::vector<std::string>& c, const std::vector<std::string>& p) {
    return lcs_length(c.size(), p.size(), [&](size_t i, size_t j) { return c[i] == p[j]; });
}

size_t lcs_similarity(const std::vector<std::string>& c, const std::vector<std::string>& p, double threshold,
                      EmbeddingCache& cache, EmbeddingProvider* provider) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("lcs threshold must be in (0, 1]");
    if (c.empty() || p.empty()) return 0;
    auto cv = cache.get_all(c, provider);
    auto pv = cache.get_all(p, provider);
    return lcs_length(c.size(), p.size(), [&](size_t i, size_t j) {
        return c[i] == p[j] || cosine_similarity(cv[i], pv[j]) > threshold;
    });
}

std::string_view branch_scoring_name(BranchScoring scoring) {
    return scoring == BranchScoring::Best ? "best" : "flat";
}

BranchScoring parse_branch_scoring(std::string_view name) {
    if (name == "best") return BranchScoring::Best;
    if (name == "flat") return BranchScoring::Flat;
    throw ConfigError("unknown branch scoring \"" + std::string(name) + "\" (expected best or flat)");
}

EvalReport evaluate_flow(const DialogueFlow& flow, const Corpus& heldout, const EvalConfig& cfg,
                         EmbeddingCache& cache, EmbeddingProvider* provider) {
    if (heldout.empty()) throw ValidationError("held-out set is empty");
    if (!heldout.annotated()) throw ValidationError("held-out set must be fully annotated");
    if (flow.main.nodes.empty()) throw ValidationError("flow has no steps");
    if (!(cfg.lcs_threshold > 0.0 && cfg.lcs_threshold <= 1.0))
        throw ValidationError("lcs threshold must be in (0, 1]");

    std::vector<std::vector<std::string>> hyps;
    if (cfg.branch_scoring == BranchScoring::Flat) hyps.push_back(flow_flat_forms(flow));
    else hyps = flow_linearizations(flow);
    std::vector<TokenSequence> hyp_tokens;
    for (const auto& h : hyps) hyp_tokens.push_back(tokenize_forms(h));

    const auto& convs = heldout.conversations();
    std::vector<std::vector<std::string>> refs;
    std::set<std::string> vocab;
    for (const auto& h : hyps) vocab.insert(h.begin(), h.end());
    for (const auto& c : convs) {
        refs.push_back(canonical_sequence(c));
        vocab.insert(refs.back().begin(), refs.back().end());
    }
    // Embed every form once so the parallel loop only reads.
    std::vector<std::string> words(vocab.begin(), vocab.end());
    auto vecs = cache.get_all(words, provider);
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < words.size(); ++i) index.emplace(words[i], i);

    std::vector<ConversationScores> scores(convs.size());
    auto score_one = [&](size_t k) {
        const auto& ref = refs[k];
        TokenSequence ref_tokens = tokenize_forms(ref);
        ConversationScores s;
        s.id = convs[k].id;
        s.turns = ref.size();
        for (size_t h = 0; h < hyps.size(); ++h) {
            s.bleu = std::max(s.bleu, bleu(hyp_tokens[h], ref_tokens));
            s.rouge_l = std::max(s.rouge_l, rouge_l(hyp_tokens[h], ref_tokens));
            s.meteor = std::max(s.meteor, meteor_lite(hyp_tokens[h], ref_tokens));
            s.lcs_exact = std::max(s.lcs_exact, lcs_exact(ref, hyps[h]));
            const auto& hyp = hyps[h];
            s.lcs_sim = std::max(s.lcs_sim, lcs_length(ref.size(), hyp.size(), [&](size_t i, size_t j) {
                return ref[i] == hyp[j] ||
                       cosine_similarity(vecs[index.at(ref[i])], vecs[index.at(hyp[j])]) > cfg.lcs_threshold;
            }));
        }
        scores[k] = std::move(s);
    };
    size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, convs.size());
    {
        std::vector<std::jthread> pool;
        for (size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (size_t k = t; k < convs.size(); k += threads) score_one(k);
            });
    }

    EvalReport report;
    report.method_tag = flow.method_tag;
    report.branch_scoring = cfg.branch_scoring;
    report.lcs_threshold = cfg.lcs_threshold;
    report.count = scores.size();
    for (const auto& s : scores) {
        report.mean_bleu += s.bleu;
        report.mean_rouge_l += s.rouge_l;
        report.mean_meteor += s.meteor;
        report.mean_lcs_exact += static_cast<double>(s.lcs_exact);
        report.mean_lcs_sim += static_cast<double>(s.lcs_sim);
        report.mean_turns += static_cast<double>(s.turns);
    }
    double n = static_cast<double>(scores.size());
    report.mean_bleu /= n;
    report.mean_rouge_l /= n;
    report.mean_meteor /= n;
    report.mean_lcs_exact /= n;
    report.mean_lcs_sim /= n;
    report.mean_turns /= n;
    report.per_conversation = std::move(scores);
    return report;
}

namespace {
const char* kReportNotes =
    "sentence-level scores averaged per held-out conversation; flow = hypothesis, conversation = reference; "
    "BLEU-4 (order min(4, hyp length)) with add-one smoothing on zero-match orders; METEOR-lite uses exact "
    "unigram matches only (no stemming or synonyms); BertScore not computed";
}

std::string report_to_json(const EvalReport& report) {
    using detail::round6;
    ordered_json j;
    j["method"] = report.method_tag;
    j["notes"] = kReportNotes;
    j["branch_scoring"] = branch_scoring_name(report.branch_scoring);
    j["lcs_threshold"] = round6(report.lcs_threshold);
    j["count"] = report.count;
    ordered_json agg;
    agg["bleu"] = round6(report.mean_bleu);
    agg["rouge_l"] = round6(report.mean_rouge_l);
    agg["meteor"] = round6(report.mean_meteor);
    agg["bertscore"] = nullptr;
    agg["lcs_exact"] = round6(report.mean_lcs_exact);
    agg["lcs_sim"] = round6(report.mean_lcs_sim);
    agg["turns"] = round6(report.mean_turns);
    j["aggregate"] = std::move(agg);
    ordered_json per = ordered_json::array();
    for (const auto& s : report.per_conversation) {
        ordered_json r;
        r["id"] = s.id;
        r["bleu"] = round6(s.bleu);
        r["rouge_l"] = round6(s.rouge_l);
        r["meteor"] = round6(s.meteor);
        r["lcs_exact"] = s.lcs_exact;
        r["lcs_sim"] = s.lcs_sim;
        r["turns"] = s.turns;
        per.push_back(std::move(r));
    }
    j["per_conversation"] = std::move(per);
    return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
    using detail::fixed6;
    std::string out;
    out += "# " + std::string(kReportNotes) + "\n";
    out += "# branch scoring: " + std::string(branch_scoring_name(report.branch_scoring)) +
           "; lcs similarity threshold: " + fixed6(report.lcs_threshold) + "\n";
    out += "method\tconversations\tbleu\trouge_l\tmeteor\tbertscore\tlcs_exact\tlcs_sim\tturns\n";
    out += report.method_tag + "\t" + std::to_string(report.count) + "\t" + fixed6(report.mean_bleu) + "\t" +
           fixed6(report.mean_rouge_l) + "\t" + fixed6(report.mean_meteor) + "\t-\t" +
           fixed6(report.mean_lcs_exact) + "\t" + fixed6(report.mean_lcs_sim) + "\t" + fixed6(report.mean_turns) +
           "\n";
    return out;
}

AlignmentFile parse_alignments(std::istream& in, std::string_view source_name) {
    AlignmentFile out;
    std::set<std::string> ids;
    std::string line;
    size_t lineno = 0;
    auto fail = [&](const std::string& field, const std::string& msg) -> void {
        throw ParseError(std::string(source_name) + ":" + std::to_string(lineno) + ": field '" + field + "': " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail("<record>", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("conversation_id") || !j["conversation_id"].is_string())
            fail("conversation_id", "expected a string");
        AlignmentRecord rec;
        rec.conversation_id = j["conversation_id"].get<std::string>();
        if (!ids.insert(rec.conversation_id).second) fail("conversation_id", "duplicate \"" + rec.conversation_id + "\"");
        if (!j.contains("mappings") || !j["mappings"].is_array()) fail("mappings", "expected an array");
        std::set<size_t> steps, turns;
        for (size_t k = 0; k < j["mappings"].size(); ++k) {
            const auto& m = j["mappings"][k];
            std::string f = "mappings[" + std::to_string(k) + "]";
            if (!m.is_object()) fail(f, "expected an object");
            AlignmentMapping am;
            if (!m.contains("step") || !m["step"].is_number_unsigned()) fail(f + ".step", "expected a non-negative integer");
            am.step = m["step"].get<size_t>();
            if (m.contains("turn") && !m["turn"].is_null()) {
                if (!m["turn"].is_number_unsigned()) fail(f + ".turn", "expected a non-negative integer or null");
                am.turn = m["turn"].get<size_t>();
            }
            if (!m.contains("relevance") || !m["relevance"].is_number()) fail(f + ".relevance", "expected a number");
            am.relevance = m["relevance"].get<double>();
            if (am.relevance != 0.0 && am.relevance != 0.5 && am.relevance != 1.0)
                fail(f + ".relevance", "expected 0, 0.5 or 1");
            if (!steps.insert(am.step).second) fail(f + ".step", "step mapped more than once");
            if (am.turn && !turns.insert(*am.turn).second) fail(f + ".turn", "turn mapped more than once");
            rec.mappings.push_back(am);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

AlignmentFile load_alignments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open alignment file " + path.string());
    return parse_alignments(in, path.string());
}

PrecisionRecall precision_recall(const DialogueFlow& flow, const AlignmentFile& alignments, const Corpus& corpus) {
    auto steps = flow_steps(flow);
    if (steps.empty()) throw ValidationError("flow has no steps");
    size_t user_steps = 0, bot_steps = 0;
    for (const auto& s : steps) {
        if (s.starts_with("user ")) ++user_steps;
        else if (s.starts_with("bot ")) ++bot_steps;
    }
    double rel = 0.0, rel_user_step = 0.0, rel_bot_step = 0.0, rel_user_turn = 0.0, rel_bot_turn = 0.0;
    size_t turns = 0, user_turns = 0, bot_turns = 0;
    for (const auto& rec : alignments) {
        const Conversation* conv = corpus.find(rec.conversation_id);
        if (!conv) throw ValidationError("alignment references unknown conversation \"" + rec.conversation_id + "\"");
        turns += conv->turns.size();
        for (const auto& t : conv->turns) (t.role == SpeakerRole::User ? user_turns : bot_turns)++;
        for (const auto& m : rec.mappings) {
            if (m.step >= steps.size())
                throw ValidationError("alignment for \"" + rec.conversation_id + "\" references step " +
                                      std::to_string(m.step) + " of a " + std::to_string(steps.size()) + "-step flow");
            if (!m.turn) continue;
            if (*m.turn >= conv->turns.size())
                throw ValidationError("alignment for \"" + rec.conversation_id + "\" references turn " +
                                      std::to_string(*m.turn) + " of a " + std::to_string(conv->turns.size()) +
                                      "-turn conversation");
            rel += m.relevance;
            if (steps[m.step].starts_with("user ")) rel_user_step += m.relevance;
            else if (steps[m.step].starts_with("bot ")) rel_bot_step += m.relevance;
            (conv->turns[*m.turn].role == SpeakerRole::User ? rel_user_turn : rel_bot_turn) += m.relevance;
        }
    }
    auto pct = [](double num, double den) { return den > 0.0 ? 100.0 * num / den : 0.0; };
    double convs = static_cast<double>(alignments.size());
    PrecisionRecall pr;
    pr.conversations = alignments.size();
    pr.steps = steps.size();
    pr.precision = pct(rel, static_cast<double>(steps.size()) * convs);
    pr.recall = pct(rel, static_cast<double>(turns));
    pr.user = {pct(rel_user_step, static_cast<double>(user_steps) * convs), pct(rel_user_turn, static_cast<double>(user_turns))};
    pr.bot = {pct(rel_bot_step, static_cast<double>(bot_steps) * convs), pct(rel_bot_turn, static_cast<double>(bot_turns))};
    return pr;
}

std::string precision_recall_to_json(const PrecisionRecall& pr) {
    using detail::round6;
    ordered_json j;
    j["conversations"] = pr.conversations;
    j["flow_steps"] = pr.steps;
    j["precision"] = round6(pr.precision);
    j["recall"] = round6(pr.recall);
    j["user"] = {{"precision", round6(pr.user.precision)}, {"recall", round6(pr.user.recall)}};
    j["bot"] = {{"precision", round6(pr.bot.precision)}, {"recall", round6(pr.bot.recall)}};
    return j.dump(2) + "\n";
}

} // namespace flowmine
