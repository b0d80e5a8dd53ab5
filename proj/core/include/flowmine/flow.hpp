#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace flowmine {

struct DialoguePath {
    std::vector<std::string> nodes;
    std::int64_t bottleneck = 0;   // minimum edge weight along the path
    std::int64_t total_weight = 0; // sum of edge weights along the path

    bool operator==(const DialoguePath&) const = default;
};

struct Digression {
    std::string branch_from; // node on the main path
    std::string branch_head; // first node of the alternative branch
    DialoguePath path;       // branch_head .. target
    double candidate_similarity = 0.0;
    double path_similarity = 0.0;

    bool operator==(const Digression&) const = default;
};

struct DialogueFlow {
    DialoguePath main;
    std::vector<Digression> digressions;
    std::string method_tag;

    bool operator==(const DialogueFlow&) const = default;
};

// Structured (JSON) flow artifact; floats use fixed 6-decimal notation.
std::string flow_to_json(const DialogueFlow& flow);
DialogueFlow flow_from_json(const std::string& text);

// Steps in rendered order: main path with each digression path inserted
// right after its branch_from node.
std::vector<std::string> flow_steps(const DialogueFlow& flow);

// Colang-style text: one form per line, digressions as indented `when` blocks.
std::string render_colang(const DialogueFlow& flow);

} // namespace flowmine
