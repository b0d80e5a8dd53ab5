#include "flowmine/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flowmine/error.hpp"
#include "text.hpp"

namespace flowmine {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view role_name(SpeakerRole role) {
    return role == SpeakerRole::User ? "user" : "agent";
}

std::string_view role_token(SpeakerRole role) {
    return role == SpeakerRole::User ? "user" : "bot";
}

bool Conversation::annotated() const {
    for (const auto& t : turns)
        if (!t.canonical_form) return false;
    return true;
}

Corpus::Corpus(std::vector<Conversation> conversations) : conversations_(std::move(conversations)) {
    std::set<std::string, std::less<>> ids;
    for (const auto& c : conversations_) {
        if (c.id.empty()) throw ValidationError("conversation with empty id");
        if (!ids.insert(c.id).second) throw ValidationError("duplicate conversation id \"" + c.id + "\"");
        if (c.turns.empty()) throw ValidationError("conversation \"" + c.id + "\" has no turns");
        for (size_t i = 0; i < c.turns.size(); ++i) {
            const Turn& t = c.turns[i];
            std::string where = "conversation \"" + c.id + "\" turn " + std::to_string(i);
            if (detail::trim(t.text).empty()) throw ValidationError(where + ": empty text");
            if (t.canonical_form) {
                if (detail::trim(*t.canonical_form).empty())
                    throw ValidationError(where + ": empty canonical_form");
                if (detail::has_line_break(*t.canonical_form))
                    throw ValidationError(where + ": canonical_form contains a line break");
            }
            if (i > 0 && c.turns[i - 1].role == t.role)
                throw ValidationError(where + ": same role as previous turn");
        }
        if (!c.annotated()) annotated_ = false;
    }
}

const Conversation* Corpus::find(std::string_view id) const {
    for (const auto& c : conversations_)
        if (c.id == id) return &c;
    return nullptr;
}

std::vector<Turn> merge_consecutive_turns(std::vector<Turn> turns) {
    std::vector<Turn> out;
    for (auto& t : turns) {
        if (!out.empty() && out.back().role == t.role) {
            out.back().text += " " + t.text;
            if (!out.back().canonical_form) out.back().canonical_form = std::move(t.canonical_form);
        } else {
            out.push_back(std::move(t));
        }
    }
    return out;
}

namespace {

[[noreturn]] void fail(std::string_view source, size_t line, const std::string& field, const std::string& msg) {
    std::ostringstream os;
    os << source << ":" << line << ": field '" << field << "': " << msg;
    throw ParseError(os.str());
}

Conversation parse_record(const json& rec, std::string_view source, size_t line) {
    if (!rec.is_object()) fail(source, line, "<record>", "expected an object");
    Conversation conv;
    auto id = rec.find("id");
    if (id == rec.end() || !id->is_string()) fail(source, line, "id", "expected a string");
    conv.id = id->get<std::string>();
    if (auto d = rec.find("domain"); d != rec.end() && !d->is_null()) {
        if (!d->is_string()) fail(source, line, "domain", "expected a string or null");
        conv.domain = d->get<std::string>();
    }
    auto turns = rec.find("turns");
    if (turns == rec.end() || !turns->is_array()) fail(source, line, "turns", "expected an array");
    if (turns->empty()) fail(source, line, "turns", "expected at least one turn");
    std::vector<Turn> parsed;
    for (size_t i = 0; i < turns->size(); ++i) {
        const json& t = (*turns)[i];
        std::string prefix = "turns[" + std::to_string(i) + "]";
        if (!t.is_object()) fail(source, line, prefix, "expected an object");
        Turn turn;
        auto role = t.find("role");
        if (role == t.end() || !role->is_string()) fail(source, line, prefix + ".role", "expected a string");
        if (*role == "user") turn.role = SpeakerRole::User;
        else if (*role == "agent") turn.role = SpeakerRole::Agent;
        else fail(source, line, prefix + ".role", "expected \"user\" or \"agent\"");
        auto text = t.find("text");
        if (text == t.end() || !text->is_string()) fail(source, line, prefix + ".text", "expected a string");
        turn.text = detail::trim(text->get<std::string>());
        if (turn.text.empty()) fail(source, line, prefix + ".text", "empty after trimming");
        if (auto cf = t.find("canonical_form"); cf != t.end() && !cf->is_null()) {
            if (!cf->is_string()) fail(source, line, prefix + ".canonical_form", "expected a string or null");
            std::string form = detail::trim(cf->get<std::string>());
            if (form.empty()) fail(source, line, prefix + ".canonical_form", "empty");
            if (detail::has_line_break(form)) fail(source, line, prefix + ".canonical_form", "contains a line break");
            turn.canonical_form = std::move(form);
        }
        parsed.push_back(std::move(turn));
    }
    conv.turns = merge_consecutive_turns(std::move(parsed));
    return conv;
}

} // namespace

Corpus parse_corpus(std::istream& in, std::string_view source_name) {
    std::vector<Conversation> convs;
    std::set<std::string, std::less<>> ids;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(source_name, lineno, "<record>", std::string("invalid JSON: ") + e.what());
        }
        Conversation conv = parse_record(rec, source_name, lineno);
        if (!ids.insert(conv.id).second)
            throw ParseError(std::string(source_name) + ":" + std::to_string(lineno) +
                             ": duplicate conversation id \"" + conv.id + "\"");
        convs.push_back(std::move(conv));
    }
    if (in.bad()) throw IoError("read failure on " + std::string(source_name));
    if (convs.empty()) throw ParseError(std::string(source_name) + ": empty corpus file");
    return Corpus(std::move(convs));
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path.string());
    return parse_corpus(in, path.string());
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& c : corpus.conversations()) {
        ordered_json rec;
        rec["id"] = c.id;
        rec["domain"] = c.domain ? ordered_json(*c.domain) : ordered_json(nullptr);
        ordered_json turns = ordered_json::array();
        for (const auto& t : c.turns) {
            ordered_json jt;
            jt["role"] = role_name(t.role);
            jt["text"] = t.text;
            jt["canonical_form"] = t.canonical_form ? ordered_json(*t.canonical_form) : ordered_json(nullptr);
            turns.push_back(std::move(jt));
        }
        rec["turns"] = std::move(turns);
        out << rec.dump() << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_corpus(corpus, out);
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

std::string prefixed_form(SpeakerRole role, std::string_view form) {
    std::string token(role_token(role));
    if (form == token || form.starts_with(token + " ")) return std::string(form);
    return token + " " + std::string(form);
}

std::vector<std::string> canonical_sequence(const Conversation& conv) {
    std::vector<std::string> out;
    out.reserve(conv.turns.size());
    for (size_t i = 0; i < conv.turns.size(); ++i) {
        const Turn& t = conv.turns[i];
        if (!t.canonical_form)
            throw ValidationError("conversation \"" + conv.id + "\" turn " + std::to_string(i) +
                                  " has no canonical form");
        out.push_back(prefixed_form(t.role, *t.canonical_form));
    }
    return out;
}

} // namespace flowmine
