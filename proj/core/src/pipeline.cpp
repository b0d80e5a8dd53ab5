#include "flowmine/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "flowmine/annotator.hpp"
#include "flowmine/error.hpp"
#include "flowmine/graph.hpp"
#include "flowmine/synthetic.hpp"
#include "json_util.hpp"
#include "text.hpp"

#ifndef FLOWMINE_VERSION
#define FLOWMINE_VERSION "0.0.0"
#endif

namespace flowmine {

namespace fs = std::filesystem;
using detail::ordered_json;

// ---------------------------------------------------------------- config file

ConfigValues parse_config_text(std::string_view text, std::string_view source_name) {
    ConfigValues out;
    std::string section;
    size_t lineno = 0;
    for (const auto& raw : detail::split_lines(text)) {
        ++lineno;
        auto fail = [&](const std::string& msg) {
            throw ConfigError(std::string(source_name) + ":" + std::to_string(lineno) + ": " + msg);
        };
        std::string line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail("empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (!value.empty() && value.front() == '"') {
            std::string parsed;
            size_t i = 1;
            bool closed = false;
            for (; i < value.size(); ++i) {
                char c = value[i];
                if (c == '\\' && i + 1 < value.size()) {
                    char n = value[++i];
                    parsed += n == 'n' ? '\n' : n == 't' ? '\t' : n;
                } else if (c == '"') {
                    closed = true;
                    ++i;
                    break;
                } else {
                    parsed += c;
                }
            }
            if (!closed) fail("unterminated string for key " + key);
            std::string rest = detail::trim(value.substr(i));
            if (!rest.empty() && rest.front() != '#') fail("unexpected text after string value for key " + key);
            value = parsed;
        } else {
            auto hash = value.find('#');
            if (hash != std::string::npos) value = detail::trim(value.substr(0, hash));
        }
        std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) fail("duplicate key " + full);
        out[full] = value;
    }
    return out;
}

ConfigValues load_config_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (in.fail() || !in.eof()) throw ConfigError("invalid value for " + key + ": \"" + value + "\"");
    if constexpr (std::is_unsigned_v<T>)
        if (value.find('-') != std::string::npos) throw ConfigError("invalid value for " + key + ": \"" + value + "\"");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("invalid boolean for " + key + ": \"" + value + "\"");
}

fs::path resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) return {};
    fs::path p(value);
    return p.is_absolute() || base.empty() ? p : base / p;
}

} // namespace

PipelineConfig PipelineConfig::from_values(const ConfigValues& values, const fs::path& base_dir) {
    PipelineConfig c;
    for (const auto& [key, v] : values) {
        if (key == "corpus") c.corpus = resolve(base_dir, v);
        else if (key == "output_dir") c.output_dir = resolve(base_dir, v);
        else if (key == "batch_size") c.batch_size = parse_number<size_t>(key, v);
        else if (key == "sampling") c.sampling = v;
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "completion.endpoint") c.completion_endpoint = v;
        else if (key == "completion.model") c.model_name = v;
        else if (key == "completion.max_in_flight") c.max_in_flight = parse_number<size_t>(key, v);
        else if (key == "completion.max_retries") c.max_retries = parse_number<int>(key, v);
        else if (key == "completion.timeout_ms") c.timeout_ms = parse_number<int>(key, v);
        else if (key == "completion.max_tokens") c.max_tokens = parse_number<int>(key, v);
        else if (key == "completion.credentials_env") c.credentials_env = v;
        else if (key == "annotate.example") c.annotation_example = resolve(base_dir, v);
        else if (key == "annotate.template") c.annotation_template = resolve(base_dir, v);
        else if (key == "extract.baseline_template") c.baseline_template = resolve(base_dir, v);
        else if (key == "embeddings.provider") c.embedding_provider = v;
        else if (key == "embeddings.cache") c.embedding_cache = resolve(base_dir, v);
        else if (key == "embeddings.endpoint") c.embedding_endpoint = v;
        else if (key == "embeddings.tag") c.embedding_tag = v;
        else if (key == "embeddings.synthetic_seed") c.synthetic_seed = parse_number<std::uint64_t>(key, v);
        else if (key == "embeddings.synthetic_dim") c.synthetic_dim = parse_number<size_t>(key, v);
        else if (key == "normalize.user_threshold") c.normalizer.user_threshold = parse_number<double>(key, v);
        else if (key == "normalize.agent_threshold") c.normalizer.agent_threshold = parse_number<double>(key, v);
        else if (key == "normalize.linkage") c.normalizer.linkage = parse_linkage(v);
        else if (key == "normalize.dump_clusters") c.dump_clusters = parse_bool(key, v);
        else if (key == "graph.dot") c.dot = parse_bool(key, v);
        else if (key == "extract.method") c.method = v;
        else if (key == "extract.digressions") c.extractor.max_digressions = parse_number<size_t>(key, v);
        else if (key == "extract.epsilon") c.extractor.epsilon = parse_number<double>(key, v);
        else if (key == "extract.kappa") c.extractor.kappa = parse_number<double>(key, v);
        else if (key == "extract.max_path_nodes") c.extractor.max_path_nodes = parse_number<size_t>(key, v);
        else if (key == "extract.max_search_states") c.extractor.max_search_states = parse_number<size_t>(key, v);
        else if (key == "evaluate.lcs_threshold") c.eval.lcs_threshold = parse_number<double>(key, v);
        else if (key == "evaluate.branch_scoring") c.eval.branch_scoring = parse_branch_scoring(v);
        else if (key == "evaluate.alignments") c.alignments = resolve(base_dir, v);
        else if (key == "evaluate.threads") c.eval.threads = parse_number<size_t>(key, v);
        else throw ConfigError("unknown config key \"" + key + "\"");
    }
    return c;
}

void PipelineConfig::validate() const {
    if (corpus.empty()) throw ConfigError("corpus path is required");
    if (!fs::exists(corpus)) throw ConfigError("corpus file not found: " + corpus.string());
    if (output_dir.empty()) throw ConfigError("output_dir is required");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (sampling != "first" && sampling != "seeded") throw ConfigError("sampling must be \"first\" or \"seeded\"");
    if (max_in_flight < 1) throw ConfigError("completion.max_in_flight must be at least 1");
    if (max_retries < 0) throw ConfigError("completion.max_retries must be non-negative");
    if (timeout_ms < 1) throw ConfigError("completion.timeout_ms must be positive");
    if (max_tokens < 1) throw ConfigError("completion.max_tokens must be positive");
    if (!completion_endpoint.empty() && !completion_endpoint.starts_with("http://"))
        throw ConfigError("completion.endpoint must be an http:// URL");
    for (const auto& p : {annotation_example, annotation_template, baseline_template, alignments})
        if (!p.empty() && !fs::exists(p)) throw ConfigError("file not found: " + p.string());
    if (embedding_provider == "cache") {
        if (!embedding_cache.empty() && !fs::exists(embedding_cache))
            throw ConfigError("embedding cache not found: " + embedding_cache.string());
    } else if (embedding_provider == "http") {
        if (!embedding_endpoint.starts_with("http://")) throw ConfigError("embeddings.endpoint must be an http:// URL");
        if (!embedding_cache.empty() && !fs::exists(embedding_cache))
            throw ConfigError("embedding cache not found: " + embedding_cache.string());
    } else if (embedding_provider == "synthetic") {
        if (synthetic_dim < 1) throw ConfigError("embeddings.synthetic_dim must be positive");
    } else {
        throw ConfigError("embeddings.provider must be cache, http or synthetic");
    }
    if (method != "widest" && method != "longest" && method != "maxweight" && method != "prompt")
        throw ConfigError("extract.method must be widest, longest, maxweight or prompt");
    try {
        normalizer.validate();
        extractor.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    if (!(eval.lcs_threshold > 0.0 && eval.lcs_threshold <= 1.0))
        throw ConfigError("evaluate.lcs_threshold must be in (0, 1]");
}

std::string PipelineConfig::canonical() const {
    using detail::fixed6;
    std::ostringstream o;
    o << "corpus = " << corpus.generic_string() << "\n"
      << "output_dir = " << output_dir.generic_string() << "\n"
      << "batch_size = " << batch_size << "\n"
      << "sampling = " << sampling << "\n"
      << "seed = " << seed << "\n"
      << "completion.endpoint = " << completion_endpoint << "\n"
      << "completion.model = " << model_name << "\n"
      << "completion.max_in_flight = " << max_in_flight << "\n"
      << "completion.max_retries = " << max_retries << "\n"
      << "completion.timeout_ms = " << timeout_ms << "\n"
      << "completion.max_tokens = " << max_tokens << "\n"
      << "completion.credentials_env = " << credentials_env << "\n"
      << "annotate.example = " << annotation_example.generic_string() << "\n"
      << "annotate.template = " << annotation_template.generic_string() << "\n"
      << "extract.baseline_template = " << baseline_template.generic_string() << "\n"
      << "embeddings.provider = " << embedding_provider << "\n"
      << "embeddings.cache = " << embedding_cache.generic_string() << "\n"
      << "embeddings.endpoint = " << embedding_endpoint << "\n"
      << "embeddings.tag = " << embedding_tag << "\n"
      << "embeddings.synthetic_seed = " << synthetic_seed << "\n"
      << "embeddings.synthetic_dim = " << synthetic_dim << "\n"
      << "normalize.user_threshold = " << fixed6(normalizer.user_threshold) << "\n"
      << "normalize.agent_threshold = " << fixed6(normalizer.agent_threshold) << "\n"
      << "normalize.linkage = " << linkage_name(normalizer.linkage) << "\n"
      << "normalize.dump_clusters = " << (dump_clusters ? "true" : "false") << "\n"
      << "graph.dot = " << (dot ? "true" : "false") << "\n"
      << "extract.method = " << method << "\n"
      << "extract.digressions = " << extractor.max_digressions << "\n"
      << "extract.epsilon = " << fixed6(extractor.epsilon) << "\n"
      << "extract.kappa = " << fixed6(extractor.kappa) << "\n"
      << "extract.max_path_nodes = " << extractor.max_path_nodes << "\n"
      << "extract.max_search_states = " << extractor.max_search_states << "\n"
      << "evaluate.lcs_threshold = " << fixed6(eval.lcs_threshold) << "\n"
      << "evaluate.branch_scoring = " << branch_scoring_name(eval.branch_scoring) << "\n"
      << "evaluate.alignments = " << alignments.generic_string() << "\n"
      << "evaluate.threads = " << eval.threads << "\n";
    return o.str();
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical()); }

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

// ---------------------------------------------------------------- stages

std::string_view stage_name(Stage stage) {
    switch (stage) {
    case Stage::Annotate: return "annotate";
    case Stage::Normalize: return "normalize";
    case Stage::Graph: return "graph";
    case Stage::Extract: return "extract";
    case Stage::Evaluate: return "evaluate";
    }
    return "unknown";
}

const char* tool_version() { return FLOWMINE_VERSION; }

StageError::StageError(Stage stage, const std::string& what)
    : std::runtime_error("stage " + std::string(stage_name(stage)) + " failed: " + what), stage_(stage) {}

Split split_corpus(const Corpus& corpus, const PipelineConfig& cfg) {
    std::vector<std::string> ids;
    for (const auto& c : corpus.conversations()) ids.push_back(c.id);
    Split split;
    size_t n = ids.size();
    size_t take = cfg.batch_size;
    if (n < 2 * cfg.batch_size) {
        split.fallback = true;
        take = std::max<size_t>(1, (n * 8) / 10);
        if (take >= n && n > 1) take = n - 1;
    }
    if (cfg.sampling == "seeded") {
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(cfg.seed);
        for (size_t i = ids.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * static_cast<double>(i));
            std::swap(ids[i - 1], ids[j]);
        }
        split.batch.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
        split.heldout.assign(ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end());
        std::sort(split.batch.begin(), split.batch.end());
        std::sort(split.heldout.begin(), split.heldout.end());
    } else {
        split.batch.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
        split.heldout.assign(ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end());
    }
    return split;
}

namespace {

fs::path out_path(const PipelineConfig& cfg, const char* name) { return cfg.output_dir / name; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out << data;
    out.flush();
    if (!out) throw IoError("write failure on " + p.string());
}

// Input produced by an upstream stage; a missing file names that stage.
fs::path require_artifact(const PipelineConfig& cfg, const char* name, Stage producer) {
    fs::path p = out_path(cfg, name);
    if (!fs::exists(p))
        throw Error("missing " + std::string(name) + " in " + cfg.output_dir.string() + "; run the " +
                    std::string(stage_name(producer)) + " stage first");
    return p;
}

void record(const PipelineConfig& cfg, Stage stage, const std::vector<const char*>& names) {
    fs::path mpath = out_path(cfg, artifact::kManifest);
    ordered_json manifest;
    if (fs::exists(mpath)) {
        try {
            manifest = ordered_json::parse(read_file(mpath));
        } catch (const ordered_json::parse_error&) {
            manifest = ordered_json();
        }
    }
    if (!manifest.is_object() || !manifest.contains("artifacts") || !manifest["artifacts"].is_object())
        manifest = ordered_json{{"artifacts", ordered_json::object()}};
    std::map<std::string, ordered_json> entries;
    for (const auto& [k, v] : manifest["artifacts"].items()) entries[k] = v;
    for (const char* name : names) {
        ordered_json e;
        e["stage"] = stage_name(stage);
        e["sha256"] = sha256_hex(read_file(out_path(cfg, name)));
        e["config_hash"] = cfg.hash();
        e["tool_version"] = tool_version();
        entries[name] = std::move(e);
    }
    ordered_json out;
    out["tool"] = "flowmine";
    out["tool_version"] = tool_version();
    ordered_json arts = ordered_json::object();
    for (auto& [k, v] : entries) arts[k] = std::move(v);
    out["artifacts"] = std::move(arts);
    write_file(mpath, out.dump(2) + "\n");
}

std::string credentials(const PipelineConfig& cfg) {
    if (cfg.credentials_env.empty()) return {};
    const char* v = std::getenv(cfg.credentials_env.c_str());
    return v ? v : "";
}

struct EmbeddingSetup {
    std::unique_ptr<EmbeddingCache> cache;
    std::unique_ptr<EmbeddingProvider> provider;
};

EmbeddingSetup open_embeddings(const PipelineConfig& cfg) {
    EmbeddingSetup s;
    fs::path local = out_path(cfg, artifact::kEmbeddingCache);
    if (fs::exists(local)) s.cache = EmbeddingCache::load(local);
    else if (!cfg.embedding_cache.empty()) s.cache = EmbeddingCache::load(cfg.embedding_cache);
    else s.cache = std::make_unique<EmbeddingCache>();
    if (cfg.embedding_provider == "http") {
        HttpEmbeddingProvider::Options o;
        o.endpoint = cfg.embedding_endpoint;
        o.tag = cfg.embedding_tag;
        o.api_key = credentials(cfg);
        o.timeout = std::chrono::milliseconds(cfg.timeout_ms);
        o.max_retries = cfg.max_retries;
        s.provider = std::make_unique<HttpEmbeddingProvider>(o);
    } else if (cfg.embedding_provider == "synthetic") {
        s.provider = std::make_unique<SyntheticEmbeddingProvider>(cfg.synthetic_seed, cfg.synthetic_dim);
    }
    if (s.provider) s.cache->bind_provider(s.provider->tag());
    return s;
}

void save_embeddings(const PipelineConfig& cfg, const EmbeddingSetup& s, Stage stage) {
    if (s.cache->size() == 0) return;
    s.cache->save(out_path(cfg, artifact::kEmbeddingCache));
    record(cfg, stage, {artifact::kEmbeddingCache});
}

CompletionClient make_client(const PipelineConfig& cfg, const char* purpose) {
    if (cfg.completion_endpoint.empty()) throw ConfigError(std::string(purpose) + " requires completion.endpoint");
    CompletionSettings s;
    s.endpoint = cfg.completion_endpoint;
    s.model_name = cfg.model_name;
    s.timeout = std::chrono::milliseconds(cfg.timeout_ms);
    s.max_retries = cfg.max_retries;
    s.max_tokens = cfg.max_tokens;
    auto service = std::make_shared<HttpCompletionService>(cfg.completion_endpoint, credentials(cfg), s.timeout);
    return CompletionClient(service, s);
}

Corpus subset(const Corpus& corpus, const std::vector<std::string>& ids, const char* what) {
    std::vector<Conversation> out;
    for (const auto& id : ids) {
        const Conversation* c = corpus.find(id);
        if (!c) throw Error(std::string(what) + " references unknown conversation \"" + id + "\"");
        out.push_back(*c);
    }
    return Corpus(std::move(out));
}

Split read_split(const PipelineConfig& cfg) {
    auto j = ordered_json::parse(read_file(require_artifact(cfg, artifact::kSplit, Stage::Graph)));
    Split s;
    s.batch = j.at("batch").get<std::vector<std::string>>();
    s.heldout = j.at("heldout").get<std::vector<std::string>>();
    s.fallback = j.value("fallback", false);
    return s;
}

void stage_annotate(const PipelineConfig& cfg, std::ostream& log) {
    Corpus corpus = load_corpus(cfg.corpus);
    if (corpus.annotated()) {
        log << "annotate: corpus already annotated (" << corpus.size() << " conversations), passing through\n";
    } else {
        CompletionClient client = make_client(cfg, "annotating an unannotated corpus");
        PromptTemplate tmpl = cfg.annotation_template.empty()
                                  ? PromptTemplate::annotation(std::string(kAnnotationTemplate))
                                  : PromptTemplate::load(cfg.annotation_template, {"example", "conv"});
        AnnotateOptions opts;
        opts.max_in_flight = cfg.max_in_flight;
        if (!cfg.annotation_example.empty()) {
            Corpus ex = load_corpus(cfg.annotation_example);
            opts.example = format_annotated_example(ex.conversations().front());
        }
        corpus = annotate_corpus(corpus, client, tmpl, opts);
        log << "annotate: annotated " << corpus.size() << " conversations\n";
    }
    save_corpus(corpus, out_path(cfg, artifact::kAnnotated));
    record(cfg, Stage::Annotate, {artifact::kAnnotated});
}

void stage_normalize(const PipelineConfig& cfg, std::ostream& log) {
    Corpus corpus = load_corpus(require_artifact(cfg, artifact::kAnnotated, Stage::Annotate));
    auto emb = open_embeddings(cfg);
    Normalization norm = fit_normalization(corpus, cfg.normalizer, *emb.cache, emb.provider.get());
    Corpus normalized = apply_normalization(corpus, norm.map);
    save_corpus(normalized, out_path(cfg, artifact::kNormalized));
    write_file(out_path(cfg, artifact::kNormalizationMap), normalization_map_to_json(norm.map));
    std::vector<const char*> written{artifact::kNormalized, artifact::kNormalizationMap};
    if (cfg.dump_clusters) {
        write_file(out_path(cfg, artifact::kClusters), clusters_to_json(norm));
        written.push_back(artifact::kClusters);
    }
    record(cfg, Stage::Normalize, written);
    save_embeddings(cfg, emb, Stage::Normalize);
    log << "normalize: " << norm.user.clusters.size() << " user clusters, " << norm.agent.clusters.size()
        << " agent clusters\n";
}

void stage_graph(const PipelineConfig& cfg, std::ostream& log) {
    Corpus corpus = load_corpus(require_artifact(cfg, artifact::kNormalized, Stage::Normalize));
    Split split = split_corpus(corpus, cfg);
    if (split.fallback)
        log << "warning: corpus has fewer than 2 x batch_size conversations; using an 80/20 split ("
            << split.batch.size() << "/" << split.heldout.size() << ")\n";
    ordered_json js;
    js["batch"] = split.batch;
    js["heldout"] = split.heldout;
    js["fallback"] = split.fallback;
    write_file(out_path(cfg, artifact::kSplit), js.dump(2) + "\n");
    InteractionGraph graph = build_graph(subset(corpus, split.batch, "split"));
    write_file(out_path(cfg, artifact::kGraph), graph_to_json(graph));
    std::vector<const char*> written{artifact::kSplit, artifact::kGraph};
    if (cfg.dot) {
        write_file(out_path(cfg, artifact::kGraphDot), export_dot(graph));
        written.push_back(artifact::kGraphDot);
    }
    record(cfg, Stage::Graph, written);
    log << "graph: " << graph.node_count() << " nodes from " << split.batch.size() << " conversations\n";
}

void stage_extract(const PipelineConfig& cfg, std::ostream& log) {
    InteractionGraph graph = graph_from_json(read_file(require_artifact(cfg, artifact::kGraph, Stage::Graph)));
    DialogueFlow flow;
    std::optional<EmbeddingSetup> emb;
    if (cfg.method == "prompt") {
        Corpus corpus = load_corpus(require_artifact(cfg, artifact::kNormalized, Stage::Normalize));
        Split split = read_split(cfg);
        Corpus batch = subset(corpus, split.batch, "split");
        CompletionClient client = make_client(cfg, "the prompt baseline");
        PromptTemplate tmpl = cfg.baseline_template.empty()
                                  ? PromptTemplate::baseline(std::string(kBaselineTemplate))
                                  : PromptTemplate::load(cfg.baseline_template, {"conversations_with_canonical_forms"});
        flow = baseline_flow(batch.conversations(), client, tmpl, cfg.batch_size);
    } else {
        Endpoints ends = select_endpoints(graph);
        DialoguePath main = cfg.method == "widest"    ? widest_path(graph, ends.source, ends.target, cfg.extractor)
                            : cfg.method == "longest" ? longest_simple_path(graph, ends.source, ends.target, cfg.extractor)
                                                      : max_weight_simple_path(graph, ends.source, ends.target, cfg.extractor);
        std::vector<Digression> digressions;
        if (cfg.extractor.max_digressions > 0) {
            emb = open_embeddings(cfg);
            auto found = find_digressions(graph, main, cfg.extractor, *emb->cache, emb->provider.get());
            for (const auto& d : found.dropped) log << "extract: candidate \"" << d << "\" has no path to target\n";
            digressions = std::move(found.digressions);
        }
        flow = assemble_flow(std::move(main), digressions, cfg.extractor.max_digressions, cfg.method);
    }
    write_file(out_path(cfg, artifact::kFlow), flow_to_json(flow));
    write_file(out_path(cfg, artifact::kFlowColang), render_colang(flow));
    std::string dot;
    try {
        dot = export_dot(graph, &flow);
    } catch (const GraphError& e) {
        log << "warning: " << e.what() << "; flow.dot written without highlighting\n";
        dot = export_dot(graph);
    }
    write_file(out_path(cfg, artifact::kFlowDot), dot);
    record(cfg, Stage::Extract, {artifact::kFlow, artifact::kFlowColang, artifact::kFlowDot});
    if (emb) save_embeddings(cfg, *emb, Stage::Extract);
    log << "extract: " << cfg.method << " path of " << flow.main.nodes.size() << " steps, "
        << flow.digressions.size() << " digression(s)\n";
}

void stage_evaluate(const PipelineConfig& cfg, std::ostream& log) {
    DialogueFlow flow = flow_from_json(read_file(require_artifact(cfg, artifact::kFlow, Stage::Extract)));
    Corpus corpus = load_corpus(require_artifact(cfg, artifact::kNormalized, Stage::Normalize));
    Split split = read_split(cfg);
    Corpus heldout = subset(corpus, split.heldout, "split");
    auto emb = open_embeddings(cfg);
    EvalReport report = evaluate_flow(flow, heldout, cfg.eval, *emb.cache, emb.provider.get());
    write_file(out_path(cfg, artifact::kEvalReport), report_to_json(report));
    write_file(out_path(cfg, artifact::kEvalText), report_to_text(report));
    std::vector<const char*> written{artifact::kEvalReport, artifact::kEvalText};
    if (!cfg.alignments.empty()) {
        auto pr = precision_recall(flow, load_alignments(cfg.alignments), corpus);
        write_file(out_path(cfg, artifact::kPrecisionRecall), precision_recall_to_json(pr));
        written.push_back(artifact::kPrecisionRecall);
    }
    record(cfg, Stage::Evaluate, written);
    save_embeddings(cfg, emb, Stage::Evaluate);
    log << "evaluate: " << report.count << " held-out conversations, BLEU " << detail::fixed6(report.mean_bleu)
        << "\n";
}

} // namespace

void run_stage(Stage stage, const PipelineConfig& cfg, std::ostream& log) {
    cfg.validate();
    try {
        fs::create_directories(cfg.output_dir);
        switch (stage) {
        case Stage::Annotate: stage_annotate(cfg, log); break;
        case Stage::Normalize: stage_normalize(cfg, log); break;
        case Stage::Graph: stage_graph(cfg, log); break;
        case Stage::Extract: stage_extract(cfg, log); break;
        case Stage::Evaluate: stage_evaluate(cfg, log); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

void run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
    for (Stage s : {Stage::Annotate, Stage::Normalize, Stage::Graph, Stage::Extract, Stage::Evaluate})
        run_stage(s, cfg, log);
}

int run_guarded(const std::vector<Stage>& stages, const PipelineConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        for (Stage s : stages) run_stage(s, cfg, log);
        return 0;
    } catch (const ConfigError& e) {
        err << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        err << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace flowmine
