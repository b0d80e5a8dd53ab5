#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowmine/corpus.hpp"
#include "flowmine/extractor.hpp"
#include "flowmine/metrics.hpp"
#include "flowmine/normalizer.hpp"

namespace flowmine {

// Flat "section.key" -> raw value pairs from a TOML-style key/value file:
// [section] headers, key = value lines, '#' comments, quoted or bare values.
using ConfigValues = std::map<std::string, std::string>;

ConfigValues parse_config_text(std::string_view text, std::string_view source_name = "<config>");
ConfigValues load_config_file(const std::filesystem::path& path);

struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path output_dir = "out";
    size_t batch_size = 100;
    std::string sampling = "first"; // first | seeded
    std::uint64_t seed = 0;         // batch sampling only

    // Completion service (annotation and prompting baseline).
    std::string completion_endpoint;
    std::string model_name = "default";
    std::filesystem::path annotation_example; // annotated corpus whose first conversation is the example
    std::filesystem::path annotation_template;
    std::filesystem::path baseline_template;
    size_t max_in_flight = 4;
    int max_retries = 3;
    int timeout_ms = 60000;
    int max_tokens = 256;
    std::string credentials_env = "FLOWMINE_API_KEY";

    // Embeddings: cache (file only), http (service + optional cache file) or synthetic.
    std::string embedding_provider = "cache";
    std::filesystem::path embedding_cache;
    std::string embedding_endpoint;
    std::string embedding_tag;
    std::uint64_t synthetic_seed = 7;
    size_t synthetic_dim = 256;

    NormalizerConfig normalizer;
    bool dump_clusters = false;
    bool dot = false;

    std::string method = "widest"; // widest | longest | maxweight | prompt
    ExtractorConfig extractor;

    EvalConfig eval;
    std::filesystem::path alignments;

    // Builds from flat values; relative paths resolve against base_dir.
    // Throws ConfigError on unknown keys or malformed values.
    static PipelineConfig from_values(const ConfigValues& values, const std::filesystem::path& base_dir = {});
    // Range and path checks; throws ConfigError.
    void validate() const;
    // Canonical "key = value" dump of every setting (credentials excluded).
    std::string canonical() const;
    std::string hash() const;
};

enum class Stage { Annotate, Normalize, Graph, Extract, Evaluate };

std::string_view stage_name(Stage stage);
const char* tool_version();

// Error raised by a stage; carries the stage that failed.
class StageError : public std::runtime_error {
public:
    StageError(Stage stage, const std::string& what);
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kAnnotated = "annotated.jsonl";
inline constexpr const char* kNormalized = "normalized.jsonl";
inline constexpr const char* kNormalizationMap = "normalization_map.json";
inline constexpr const char* kClusters = "clusters.json";
inline constexpr const char* kEmbeddingCache = "embedding_cache.jsonl";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kGraph = "graph.json";
inline constexpr const char* kGraphDot = "graph.dot";
inline constexpr const char* kFlow = "flow.json";
inline constexpr const char* kFlowColang = "flow.colang";
inline constexpr const char* kFlowDot = "flow.dot";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kEvalText = "eval_report.txt";
inline constexpr const char* kPrecisionRecall = "precision_recall.json";
inline constexpr const char* kManifest = "manifest.json";
} // namespace artifact

struct Split {
    std::vector<std::string> batch;
    std::vector<std::string> heldout;
    bool fallback = false; // 80/20 split used for a small corpus
};

// Batch = first batch_size conversations, or a seeded sample over id-sorted
// conversations; held-out = the rest (80/20 when corpus < 2 * batch_size).
Split split_corpus(const Corpus& corpus, const PipelineConfig& cfg);

// Runs one stage; throws StageError (exit 1) or ConfigError (exit 2).
void run_stage(Stage stage, const PipelineConfig& cfg, std::ostream& log);
void run_pipeline(const PipelineConfig& cfg, std::ostream& log);

// Maps exceptions to the CLI contract: 0 ok, 1 stage failure, 2 invalid config.
int run_guarded(const std::vector<Stage>& stages, const PipelineConfig& cfg, std::ostream& log, std::ostream& err);

std::string sha256_hex(std::string_view data);

} // namespace flowmine
