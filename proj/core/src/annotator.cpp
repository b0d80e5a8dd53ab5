#include "flowmine/annotator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "flowmine/error.hpp"
#include "http.hpp"
#include "text.hpp"

namespace flowmine {

using json = nlohmann::json;

const std::string_view kAnnotationTemplate =
    "Your task is to annotate conversational utterances with intents expressed as canonical forms. Canonical forms "
    "are short summaries representing the intent of the utterance - it is neither too verbose nor too short. Here is "
    "an example to show you how the task is to be performed.\n"
    "\n"
    "{example}\n"
    "\n"
    "Annotate the following conversation in a similar manner. if similar intents are detected, make sure to use the "
    "same canonical forms as in the example given. for other ones, use the ones in the example above as reference "
    "and craft them. Each turn of the conversation should be annotated with the corresponding canonical forms.\n"
    "\n"
    "{conv}\n"
    "\n"
    "Output the annotated conversation with canonical forms.";

const std::string_view kBaselineTemplate =
    "Here is a list of dialogue flows that denote how conversations usually proceed between a user and a bot. Your "
    "task is to create a dialogue flow that best represents the conversation flow given all the dialogue flows "
    "below.\n"
    "\n"
    "{conversations_with_canonical_forms}\n"
    "\n"
    "What is the most commonly traversed path in this set of conversations? Output it following a similar format as "
    "the conversations above. Only display the output path. Do not add any comments or other text.";

HttpCompletionService::HttpCompletionService(std::string endpoint, std::string api_key,
                                             std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_(timeout) {
    detail::parse_http_url(endpoint_);
}

std::string HttpCompletionService::complete(const CompletionRequest& request) {
    json body = {{"model", request.model},
                 {"prompt", request.prompt},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    std::string raw = detail::post_json(detail::parse_http_url(endpoint_), body.dump(), api_key_, timeout_);
    json res;
    try {
        res = json::parse(raw);
    } catch (const json::parse_error&) {
        throw ServiceError("completion service returned invalid JSON");
    }
    if (!res.is_object() || !res.contains("text") || !res["text"].is_string())
        throw ServiceError("completion service response lacks a 'text' string");
    return res["text"].get<std::string>();
}

CompletionClient::CompletionClient(std::shared_ptr<CompletionService> service, CompletionSettings settings)
    : service_(std::move(service)), settings_(std::move(settings)) {
    if (!service_) throw ValidationError("completion client requires a service");
    if (settings_.max_retries < 0) throw ValidationError("max_retries must be non-negative");
}

std::string CompletionClient::complete(const std::string& prompt) const {
    CompletionRequest req{settings_.model_name, prompt, kTemperature, settings_.max_tokens};
    return detail::with_retries(settings_.max_retries, settings_.initial_backoff,
                                [&] { return service_->complete(req); });
}

PromptTemplate::PromptTemplate(std::string body, std::vector<std::string> placeholders)
    : body_(std::move(body)), placeholders_(std::move(placeholders)) {
    for (const auto& name : placeholders_) {
        std::string key = "{" + name + "}";
        size_t first = body_.find(key);
        if (first == std::string::npos) throw ValidationError("template is missing placeholder " + key);
        if (body_.find(key, first + 1) != std::string::npos)
            throw ValidationError("template placeholder " + key + " occurs more than once");
    }
}

PromptTemplate PromptTemplate::annotation(std::string body) {
    return PromptTemplate(std::move(body), {"example", "conv"});
}

PromptTemplate PromptTemplate::baseline(std::string body) {
    return PromptTemplate(std::move(body), {"conversations_with_canonical_forms"});
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path, std::vector<std::string> placeholders) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string body = ss.str();
    if (body.ends_with("\r\n")) body.resize(body.size() - 2);
    else if (body.ends_with("\n")) body.pop_back();
    return PromptTemplate(std::move(body), std::move(placeholders));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    // Substitute in order of position so inserted text is never rescanned.
    std::vector<std::pair<size_t, const std::string*>> spots;
    for (const auto& name : placeholders_) {
        auto it = values.find(name);
        if (it == values.end()) throw ValidationError("no value for placeholder {" + name + "}");
        spots.emplace_back(body_.find("{" + name + "}"), &name);
    }
    std::sort(spots.begin(), spots.end());
    std::string out;
    size_t pos = 0;
    for (const auto& [at, name] : spots) {
        out.append(body_, pos, at - pos);
        out += values.at(*name);
        pos = at + name->size() + 2;
    }
    out.append(body_, pos);
    return out;
}

std::string serialize_dialogue(std::span<const Turn> turns) {
    std::string out;
    for (size_t i = 0; i < turns.size(); ++i) {
        if (i) out += '\n';
        out += role_name(turns[i].role);
        out += ": ";
        out += turns[i].text;
    }
    return out;
}

std::string format_annotated_example(const Conversation& conv) {
    std::string out;
    auto forms = canonical_sequence(conv);
    for (size_t i = 0; i < conv.turns.size(); ++i) {
        if (i) out += '\n';
        out += std::string(role_name(conv.turns[i].role)) + ": " + conv.turns[i].text + "\n" + forms[i];
    }
    return out;
}

std::string render_annotation_prompt(const PromptTemplate& tmpl, std::string_view example,
                                     std::span<const Turn> turns) {
    return tmpl.render({{"example", std::string(example)}, {"conv", serialize_dialogue(turns)}});
}

std::string render_annotation_prompt(const PromptTemplate& tmpl, std::string_view example,
                                     const Conversation& conv) {
    return render_annotation_prompt(tmpl, example, std::span<const Turn>(conv.turns));
}

namespace {

// Drops list markers and wrapping quotes from a response line.
std::string strip_decorations(std::string line) {
    line = detail::trim(line);
    if (line.starts_with("- ") || line.starts_with("* ")) line = detail::trim(line.substr(2));
    else if (line.starts_with("\xE2\x80\xA2")) line = detail::trim(line.substr(3));
    else {
        size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') && line[i + 1] == ' ')
            line = detail::trim(line.substr(i + 2));
    }
    while (line.size() >= 2 && ((line.front() == '"' && line.back() == '"') ||
                                (line.front() == '\'' && line.back() == '\'') ||
                                (line.front() == '`' && line.back() == '`')))
        line = detail::trim(line.substr(1, line.size() - 2));
    return line;
}

bool has_alnum(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

} // namespace

std::string parse_canonical_form(std::string_view response) {
    auto lines = detail::split_lines(response);
    std::optional<std::string> last;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!detail::trim(*it).empty()) {
            last = *it;
            break;
        }
    }
    if (!last) throw UnparseableResponse("empty completion response", std::string(response));
    std::string form = detail::normalize_form(strip_decorations(*last));
    if (!has_alnum(form)) throw UnparseableResponse("completion response has no canonical form", std::string(response));
    if (form.starts_with("user:") || form.starts_with("agent:"))
        throw UnparseableResponse("completion response echoes an utterance instead of a canonical form",
                                  std::string(response));
    return form;
}

Corpus annotate_corpus(const Corpus& corpus, const CompletionClient& client, const PromptTemplate& tmpl,
                       const AnnotateOptions& options) {
    if (corpus.empty()) throw ValidationError("cannot annotate an empty corpus");
    const auto& convs = corpus.conversations();
    std::vector<Conversation> out(convs.size());
    std::vector<std::optional<std::string>> errors(convs.size());
    std::vector<std::exception_ptr> exceptions(convs.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};

    auto work = [&] {
        for (size_t c = next++; c < convs.size(); c = next++) {
            if (failed) return;
            Conversation conv = convs[c];
            size_t turn = 0;
            try {
                for (turn = 0; turn < conv.turns.size(); ++turn) {
                    if (conv.turns[turn].canonical_form) continue;
                    std::span<const Turn> history(conv.turns.data(), turn + 1);
                    std::string response = client.complete(render_annotation_prompt(tmpl, options.example, history));
                    conv.turns[turn].canonical_form = parse_canonical_form(response);
                }
                out[c] = std::move(conv);
            } catch (const UnparseableResponse& e) {
                exceptions[c] = std::make_exception_ptr(UnparseableResponse(
                    "conversation " + conv.id + " turn " + std::to_string(turn) + ": " + e.what(), e.raw()));
                failed = true;
            } catch (const Error& e) {
                exceptions[c] = std::make_exception_ptr(ServiceError(
                    "conversation " + conv.id + " turn " + std::to_string(turn) + ": " + e.what()));
                failed = true;
            }
        }
    };

    size_t workers = std::max<size_t>(1, std::min(options.max_in_flight, convs.size()));
    std::vector<std::jthread> pool;
    for (size_t i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
    pool.clear();

    for (auto& e : exceptions)
        if (e) std::rethrow_exception(e);
    return Corpus(std::move(out));
}

std::string render_baseline_prompt(const PromptTemplate& tmpl, std::span<const Conversation> batch) {
    std::string flows;
    for (size_t i = 0; i < batch.size(); ++i) {
        if (i) flows += "\n\n";
        flows += detail::join(canonical_sequence(batch[i]), "\n");
    }
    return tmpl.render({{"conversations_with_canonical_forms", flows}});
}

std::vector<std::string> parse_flow_response(std::string_view response) {
    std::vector<std::string> steps;
    for (const auto& line : detail::split_lines(response)) {
        std::string form = detail::normalize_form(strip_decorations(line));
        if (form.starts_with("user ") || form.starts_with("bot ")) steps.push_back(std::move(form));
    }
    if (steps.empty()) throw UnparseableResponse("baseline response has no canonical-form lines", std::string(response));
    return steps;
}

DialogueFlow baseline_flow(std::span<const Conversation> batch, const CompletionClient& client,
                           const PromptTemplate& tmpl, size_t max_batch) {
    if (batch.empty()) throw ValidationError("baseline batch is empty");
    if (batch.size() > max_batch)
        throw ValidationError("baseline batch of " + std::to_string(batch.size()) + " conversations exceeds maximum " +
                              std::to_string(max_batch));
    std::string response = client.complete(render_baseline_prompt(tmpl, batch));
    DialogueFlow flow;
    flow.method_tag = "prompt";
    flow.main.nodes = parse_flow_response(response);
    return flow;
}

} // namespace flowmine
