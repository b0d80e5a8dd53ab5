#pragma once
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowmine/corpus.hpp"
#include "flowmine/flow.hpp"

namespace flowmine {

struct CompletionRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 256;
};

// Anything that turns a prompt into text: HTTP service, mock, adapter.
class CompletionService {
public:
    virtual ~CompletionService() = default;
    // Throws ServiceError on failure.
    virtual std::string complete(const CompletionRequest& request) = 0;
};

// POST {"model","prompt","temperature","max_tokens"} -> {"text"}.
class HttpCompletionService : public CompletionService {
public:
    HttpCompletionService(std::string endpoint, std::string api_key, std::chrono::milliseconds timeout);
    std::string complete(const CompletionRequest& request) override;

private:
    std::string endpoint_;
    std::string api_key_;
    std::chrono::milliseconds timeout_;
};

struct CompletionSettings {
    std::string endpoint;
    std::string model_name;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    int max_tokens = 256;
    std::chrono::milliseconds initial_backoff{500};
};

// Greedy-decoding client with retry and exponential backoff.
class CompletionClient {
public:
    static constexpr double kTemperature = 0.0;

    CompletionClient(std::shared_ptr<CompletionService> service, CompletionSettings settings);
    const CompletionSettings& settings() const { return settings_; }
    std::string complete(const std::string& prompt) const;

private:
    std::shared_ptr<CompletionService> service_;
    CompletionSettings settings_;
};

class PromptTemplate {
public:
    // Validates that each placeholder occurs exactly once; throws ValidationError.
    PromptTemplate(std::string body, std::vector<std::string> placeholders);

    static PromptTemplate annotation(std::string body);
    static PromptTemplate baseline(std::string body);
    static PromptTemplate load(const std::filesystem::path& path, std::vector<std::string> placeholders);

    const std::string& body() const { return body_; }
    const std::vector<std::string>& placeholders() const { return placeholders_; }
    std::string render(const std::map<std::string, std::string>& values) const;

private:
    std::string body_;
    std::vector<std::string> placeholders_;
};

// Shipped verbatim template bodies.
extern const std::string_view kAnnotationTemplate;
extern const std::string_view kBaselineTemplate;

// "user: <text>" / "agent: <text>" lines.
std::string serialize_dialogue(std::span<const Turn> turns);
// Example block for the annotation prompt: utterance lines each followed by its form.
std::string format_annotated_example(const Conversation& conv);

std::string render_annotation_prompt(const PromptTemplate& tmpl, std::string_view example, std::span<const Turn> turns);
std::string render_annotation_prompt(const PromptTemplate& tmpl, std::string_view example, const Conversation& conv);

// Per-turn response contract: last non-empty line, bullets/quotes stripped,
// lowercased, whitespace collapsed. Throws UnparseableResponse.
std::string parse_canonical_form(std::string_view response);

struct AnnotateOptions {
    std::string example;
    size_t max_in_flight = 4;
};

Corpus annotate_corpus(const Corpus& corpus, const CompletionClient& client, const PromptTemplate& tmpl,
                       const AnnotateOptions& options = {});

std::string render_baseline_prompt(const PromptTemplate& tmpl, std::span<const Conversation> batch);
// Keeps lines starting with "user " or "bot "; throws UnparseableResponse if none remain.
std::vector<std::string> parse_flow_response(std::string_view response);

DialogueFlow baseline_flow(std::span<const Conversation> batch, const CompletionClient& client,
                           const PromptTemplate& tmpl, size_t max_batch = 100);

} // namespace flowmine
