#include "flowmine/flow.hpp"

#include "flowmine/error.hpp"
#include "json_util.hpp"

namespace flowmine {

using detail::ordered_json;

namespace {

ordered_json path_json(const DialoguePath& p) {
    ordered_json j;
    j["nodes"] = p.nodes;
    j["bottleneck"] = p.bottleneck;
    j["total_weight"] = p.total_weight;
    return j;
}

DialoguePath path_from(const ordered_json& j, const std::string& field) {
    if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array())
        throw ParseError("flow field '" + field + ".nodes': expected an array");
    DialoguePath p;
    for (const auto& n : j["nodes"]) {
        if (!n.is_string()) throw ParseError("flow field '" + field + ".nodes': expected strings");
        p.nodes.push_back(n.get<std::string>());
    }
    if (!j.contains("bottleneck") || !j["bottleneck"].is_number_integer() || !j.contains("total_weight") ||
        !j["total_weight"].is_number_integer())
        throw ParseError("flow field '" + field + "': bottleneck/total_weight must be integers");
    p.bottleneck = j["bottleneck"].get<std::int64_t>();
    p.total_weight = j["total_weight"].get<std::int64_t>();
    return p;
}

} // namespace

std::string flow_to_json(const DialogueFlow& flow) {
    ordered_json j;
    j["method"] = flow.method_tag;
    j["main"] = path_json(flow.main);
    ordered_json digs = ordered_json::array();
    for (const auto& d : flow.digressions) {
        ordered_json jd;
        jd["branch_from"] = d.branch_from;
        jd["branch_head"] = d.branch_head;
        jd["candidate_similarity"] = detail::round6(d.candidate_similarity);
        jd["path_similarity"] = detail::round6(d.path_similarity);
        jd["path"] = path_json(d.path);
        digs.push_back(std::move(jd));
    }
    j["digressions"] = std::move(digs);
    return j.dump(2) + "\n";
}

DialogueFlow flow_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw ParseError(std::string("flow: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("flow: expected an object");
    DialogueFlow flow;
    if (!j.contains("method") || !j["method"].is_string()) throw ParseError("flow field 'method': expected a string");
    flow.method_tag = j["method"].get<std::string>();
    if (!j.contains("main")) throw ParseError("flow field 'main': missing");
    flow.main = path_from(j["main"], "main");
    if (j.contains("digressions")) {
        if (!j["digressions"].is_array()) throw ParseError("flow field 'digressions': expected an array");
        for (size_t i = 0; i < j["digressions"].size(); ++i) {
            const auto& jd = j["digressions"][i];
            std::string field = "digressions[" + std::to_string(i) + "]";
            Digression d;
            if (!jd.is_object() || !jd.contains("branch_from") || !jd["branch_from"].is_string() ||
                !jd.contains("branch_head") || !jd["branch_head"].is_string())
                throw ParseError("flow field '" + field + "': branch_from/branch_head must be strings");
            d.branch_from = jd["branch_from"].get<std::string>();
            d.branch_head = jd["branch_head"].get<std::string>();
            d.candidate_similarity = jd.value("candidate_similarity", 0.0);
            d.path_similarity = jd.value("path_similarity", 0.0);
            d.path = path_from(jd.value("path", ordered_json()), field + ".path");
            flow.digressions.push_back(std::move(d));
        }
    }
    return flow;
}

std::vector<std::string> flow_steps(const DialogueFlow& flow) {
    std::vector<std::string> steps;
    for (const auto& node : flow.main.nodes) {
        steps.push_back(node);
        for (const auto& d : flow.digressions)
            if (d.branch_from == node) steps.insert(steps.end(), d.path.nodes.begin(), d.path.nodes.end());
    }
    return steps;
}

std::string render_colang(const DialogueFlow& flow) {
    std::string out;
    for (const auto& node : flow.main.nodes) {
        out += node + "\n";
        for (const auto& d : flow.digressions) {
            if (d.branch_from != node || d.path.nodes.empty()) continue;
            out += "  when " + d.path.nodes.front() + "\n";
            for (size_t i = 1; i < d.path.nodes.size(); ++i) out += "    " + d.path.nodes[i] + "\n";
        }
    }
    return out;
}

} // namespace flowmine
