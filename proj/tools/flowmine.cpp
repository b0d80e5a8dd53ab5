// flowmine: mine dialogue flows from annotated conversations.
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowmine/error.hpp"
#include "flowmine/pipeline.hpp"
#include "flowmine/synthetic.hpp"

namespace fs = std::filesystem;
using namespace flowmine;

namespace {

// Config keys whose values are paths; command-line values resolve against the cwd.
const std::set<std::string> kPathKeys = {"corpus",           "output_dir",      "annotate.example",   "annotate.template",
                                         "extract.baseline_template", "embeddings.cache", "evaluate.alignments"};

struct Overrides {
    std::string config;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
};

// Registers a flag that overrides one config key when given.
void flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        name, [&o, key](const std::string& v) { o.flags[key] = v; }, help + " [" + key + "]");
}

void switch_flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key, const std::string& help) {
    app->add_flag_function(
        name, [&o, key](std::int64_t n) { o.flags[key] = n > 0 ? "true" : "false"; }, help + " [" + key + "]");
}

void common_flags(CLI::App* app, Overrides& o) {
    app->add_option("-c,--config", o.config, "TOML-style config file");
    app->add_option("--set", o.sets, "Override any config key: section.key=value");
    flag(app, o, "--corpus", "corpus", "Input corpus (JSONL)");
    flag(app, o, "-o,--output-dir", "output_dir", "Output directory");
    flag(app, o, "--embeddings", "embeddings.provider", "Embedding provider: cache, http or synthetic");
    flag(app, o, "--embedding-cache", "embeddings.cache", "Embedding cache file");
    flag(app, o, "--embedding-endpoint", "embeddings.endpoint", "Embedding service URL");
    flag(app, o, "--completion-endpoint", "completion.endpoint", "Completion service URL");
}

void batch_flags(CLI::App* app, Overrides& o) {
    flag(app, o, "--batch-size", "batch_size", "Conversations in the extraction batch");
    flag(app, o, "--sampling", "sampling", "Batch selection: first or seeded");
    flag(app, o, "--seed", "seed", "Seed for batch sampling");
}

void normalize_flags(CLI::App* app, Overrides& o) {
    switch_flag(app, o, "--dump-clusters", "normalize.dump_clusters", "Write clusters.json");
    flag(app, o, "--user-threshold", "normalize.user_threshold", "Distance threshold for user forms");
    flag(app, o, "--agent-threshold", "normalize.agent_threshold", "Distance threshold for agent forms");
    flag(app, o, "--linkage", "normalize.linkage", "average, complete or single");
}

void extract_flags(CLI::App* app, Overrides& o) {
    flag(app, o, "--method", "extract.method", "widest, longest, maxweight or prompt");
    flag(app, o, "--digressions", "extract.digressions", "Number of digressions to attach");
    flag(app, o, "--epsilon", "extract.epsilon", "Candidate similarity threshold");
    flag(app, o, "--kappa", "extract.kappa", "Digression path similarity threshold");
}

void evaluate_flags(CLI::App* app, Overrides& o) {
    flag(app, o, "--alignments", "evaluate.alignments", "Step-to-turn alignment file");
    flag(app, o, "--lcs-threshold", "evaluate.lcs_threshold", "Cosine threshold for similarity LCS");
    flag(app, o, "--branch-scoring", "evaluate.branch_scoring", "best or flat");
}

PipelineConfig build_config(const Overrides& o) {
    ConfigValues values;
    fs::path base = fs::current_path();
    if (!o.config.empty()) {
        values = load_config_file(o.config);
        base = fs::absolute(o.config).parent_path();
        // Paths from the file are relative to the file.
        for (auto& [k, v] : values)
            if (kPathKeys.count(k) && !v.empty() && fs::path(v).is_relative()) v = (base / v).string();
    }
    auto put = [&](const std::string& k, const std::string& v) {
        values[k] = kPathKeys.count(k) && !v.empty() ? fs::absolute(v).string() : v;
    };
    for (const auto& s : o.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got \"" + s + "\"");
        put(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : o.flags) put(k, v);
    return PipelineConfig::from_values(values);
}

int run(const Overrides& o, const std::vector<Stage>& stages) {
    PipelineConfig cfg;
    try {
        cfg = build_config(o);
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    }
    return run_guarded(stages, cfg, std::cerr, std::cerr);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mine dialogue flows from task-oriented conversations"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        std::vector<Stage> stages;
    };
    const std::vector<Command> commands = {
        {"annotate", "Attach canonical forms to every turn", {Stage::Annotate}},
        {"normalize", "Cluster near-duplicate canonical forms", {Stage::Normalize}},
        {"graph", "Build the interaction graph from the extraction batch", {Stage::Graph}},
        {"extract", "Extract the dialogue flow and render it", {Stage::Extract}},
        {"evaluate", "Score the flow against held-out conversations", {Stage::Evaluate}},
        {"pipeline", "Run every stage in order",
         {Stage::Annotate, Stage::Normalize, Stage::Graph, Stage::Extract, Stage::Evaluate}},
    };

    std::map<std::string, Overrides> overrides;
    std::map<CLI::App*, const Command*> dispatch;
    for (const auto& cmd : commands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        Overrides& o = overrides[cmd.name];
        common_flags(sub, o);
        std::string n = cmd.name;
        bool all = n == "pipeline";
        if (all || n == "graph" || n == "extract" || n == "evaluate") batch_flags(sub, o);
        if (all || n == "annotate") flag(sub, o, "--example", "annotate.example", "Annotated example corpus");
        if (all || n == "normalize") normalize_flags(sub, o);
        if (all || n == "graph") switch_flag(sub, o, "--dot", "graph.dot", "Write graph.dot");
        if (all || n == "extract") extract_flags(sub, o);
        if (all || n == "evaluate") evaluate_flags(sub, o);
        dispatch[sub] = &cmd;
    }

    SyntheticSpec spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write the synthetic weather/music corpus");
    synth->add_option("-n,--conversations", spec.conversations, "Number of conversations")->capture_default_str();
    synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
    synth->add_option("--noise", spec.noise_probability, "Noise exchange probability")->capture_default_str();
    synth->add_option("--paraphrase", spec.paraphrase_probability, "Paraphrase probability")->capture_default_str();
    synth->add_option("-o,--output", synth_out, "Output JSONL file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (synth->parsed()) {
        try {
            save_corpus(generate_synthetic_corpus(spec), synth_out);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        return 0;
    }
    for (const auto& [sub, cmd] : dispatch)
        if (sub->parsed()) return run(overrides[cmd->name], cmd->stages);
    return 2;
}
