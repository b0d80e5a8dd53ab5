#pragma once
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowmine {

enum class SpeakerRole { User, Agent };

// "user" / "agent" as used in the interchange format.
std::string_view role_name(SpeakerRole role);
// "user" / "bot" as used in canonical forms and rendered flows.
std::string_view role_token(SpeakerRole role);

struct Turn {
    SpeakerRole role = SpeakerRole::User;
    std::string text;
    std::optional<std::string> canonical_form;

    bool operator==(const Turn&) const = default;
};

struct Conversation {
    std::string id;
    std::vector<Turn> turns;
    std::optional<std::string> domain;

    bool annotated() const;
    bool operator==(const Conversation&) const = default;
};

// Immutable, validated collection of conversations.
class Corpus {
public:
    Corpus() = default;
    // Throws ValidationError on duplicate ids, empty conversations, empty
    // text, malformed canonical forms or consecutive same-role turns.
    explicit Corpus(std::vector<Conversation> conversations);

    const std::vector<Conversation>& conversations() const { return conversations_; }
    size_t size() const { return conversations_.size(); }
    bool empty() const { return conversations_.empty(); }
    bool annotated() const { return annotated_; }
    const Conversation* find(std::string_view id) const;

    bool operator==(const Corpus& other) const { return conversations_ == other.conversations_; }

private:
    std::vector<Conversation> conversations_;
    bool annotated_ = true;
};

// Merges consecutive same-role turns; texts are joined by one space and the
// first present canonical form is kept.
std::vector<Turn> merge_consecutive_turns(std::vector<Turn> turns);

Corpus parse_corpus(std::istream& in, std::string_view source_name = "<stream>");
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Role-prefixed canonical form ("user ..." / "bot ...").
std::string prefixed_form(SpeakerRole role, std::string_view form);
std::vector<std::string> canonical_sequence(const Conversation& conv);

} // namespace flowmine
