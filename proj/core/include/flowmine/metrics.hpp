#pragma once
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowmine/corpus.hpp"
#include "flowmine/embeddings.hpp"
#include "flowmine/flow.hpp"

namespace flowmine {

using TokenSequence = std::vector<std::string>;

// Lowercase whitespace tokenization.
TokenSequence tokenize(std::string_view text);
TokenSequence tokenize_forms(const std::vector<std::string>& forms);

// Main path followed by each digression prefixed by its branch_from node.
std::vector<std::string> flow_flat_forms(const DialogueFlow& flow);
TokenSequence flow_token_sequence(const DialogueFlow& flow);
// The main path plus, per digression, the main prefix up to branch_from, the
// digression up to its first rejoin with a later main node, and the main
// suffix from there.
std::vector<std::vector<std::string>> flow_linearizations(const DialogueFlow& flow);

// All scores on a 0..100 scale; empty inputs throw ValidationError.
double bleu(const TokenSequence& hyp, const TokenSequence& ref);
double rouge_l(const TokenSequence& hyp, const TokenSequence& ref);

struct MeteorAlignment {
    size_t matches = 0;
    size_t chunks = 0;
};
// Greedy tiling: repeatedly aligns the longest run of unaligned equal tokens
// (leftmost in hyp, then in ref) until no unaligned common token remains.
MeteorAlignment meteor_alignment(const TokenSequence& hyp, const TokenSequence& ref);
double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref);

size_t lcs_length(size_t m, size_t n, const std::function<bool(size_t, size_t)>& match);
size_t lcs_exact(const std::vector<std::string>& c, const std::vector<std::string>& p);
// Elements match when equal or when their cosine similarity exceeds threshold.
size_t lcs_similarity(const std::vector<std::string>& c, const std::vector<std::string>& p, double threshold,
                      EmbeddingCache& cache, EmbeddingProvider* provider);

enum class BranchScoring { Best, Flat };

std::string_view branch_scoring_name(BranchScoring scoring);
BranchScoring parse_branch_scoring(std::string_view name);

struct EvalConfig {
    double lcs_threshold = 0.8;
    BranchScoring branch_scoring = BranchScoring::Best;
    size_t threads = 0; // 0 = hardware concurrency
};

struct ConversationScores {
    std::string id;
    double bleu = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
    size_t lcs_exact = 0;
    size_t lcs_sim = 0;
    size_t turns = 0;
};

struct EvalReport {
    std::string method_tag;
    BranchScoring branch_scoring = BranchScoring::Best;
    double lcs_threshold = 0.8;
    std::vector<ConversationScores> per_conversation;
    double mean_bleu = 0.0;
    double mean_rouge_l = 0.0;
    double mean_meteor = 0.0;
    double mean_lcs_exact = 0.0;
    double mean_lcs_sim = 0.0;
    double mean_turns = 0.0;
    size_t count = 0;
};

EvalReport evaluate_flow(const DialogueFlow& flow, const Corpus& heldout, const EvalConfig& cfg,
                         EmbeddingCache& cache, EmbeddingProvider* provider);

std::string report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

struct AlignmentMapping {
    size_t step = 0;
    std::optional<size_t> turn;
    double relevance = 0.0;
};

struct AlignmentRecord {
    std::string conversation_id;
    std::vector<AlignmentMapping> mappings;
};

using AlignmentFile = std::vector<AlignmentRecord>;

AlignmentFile parse_alignments(std::istream& in, std::string_view source_name = "<stream>");
AlignmentFile load_alignments(const std::filesystem::path& path);

struct RoleScores {
    double precision = 0.0;
    double recall = 0.0;
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    RoleScores user;
    RoleScores bot;
    size_t conversations = 0;
    size_t steps = 0;
};

// Micro precision/recall on a 0..100 scale. Steps are the flow's rendered
// steps; turn counts and roles come from the conversations in corpus.
PrecisionRecall precision_recall(const DialogueFlow& flow, const AlignmentFile& alignments, const Corpus& corpus);

std::string precision_recall_to_json(const PrecisionRecall& pr);

} // namespace flowmine
