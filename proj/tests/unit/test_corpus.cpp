#include <gtest/gtest.h>

#include <sstream>

#include "flowmine/corpus.hpp"
#include "flowmine/error.hpp"
#include "support/cases.hpp"

using namespace flowmine;

namespace {

Corpus parse(const std::string& text) {
    std::istringstream in(text);
    return parse_corpus(in, "test.jsonl");
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

Conversation annotated(const std::string& id, std::vector<std::pair<SpeakerRole, std::string>> forms) {
    Conversation c;
    c.id = id;
    for (auto& [role, form] : forms) c.turns.push_back({role, "text of " + form, form});
    return c;
}

} // namespace

TEST(Corpus, LoadsAlternatingConversationUnannotated) {
    auto c = parse(R"({"id":"c1","turns":[{"role":"user","text":"hi"},{"role":"agent","text":"hello"},)"
                   R"({"role":"user","text":"weather?"},{"role":"agent","text":"sunny"}]})");
    ASSERT_EQ(c.size(), 1u);
    EXPECT_FALSE(c.annotated());
    EXPECT_EQ(c.conversations()[0].turns.size(), 4u);
}

TEST(Corpus, MergesConsecutiveSameRoleTurns) {
    auto c = parse(R"({"id":"c1","turns":[{"role":"user","text":"hi"},{"role":"user","text":"again"},)"
                   R"({"role":"agent","text":"hello"}]})");
    const auto& turns = c.conversations()[0].turns;
    ASSERT_EQ(turns.size(), 2u);
    EXPECT_EQ(turns[0].text, "hi again");
    EXPECT_EQ(turns[1].text, "hello");
}

TEST(Corpus, DuplicateIdNamesTheId) {
    auto msg = error_of([] {
        parse("{\"id\":\"c1\",\"turns\":[{\"role\":\"user\",\"text\":\"a\"}]}\n"
              "{\"id\":\"c1\",\"turns\":[{\"role\":\"user\",\"text\":\"b\"}]}\n");
    });
    EXPECT_NE(msg.find("\"c1\""), std::string::npos) << msg;
}

TEST(Corpus, MalformedRecordReportsLineAndField) {
    auto msg = error_of([] {
        parse("{\"id\":\"c1\",\"turns\":[{\"role\":\"user\",\"text\":\"a\"}]}\n"
              "{\"id\":\"c2\",\"turns\":[{\"role\":\"robot\",\"text\":\"b\"}]}\n");
    });
    EXPECT_NE(msg.find("test.jsonl:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("role"), std::string::npos) << msg;
}

TEST(Corpus, EmptyFileIsAnError) {
    EXPECT_THROW(parse(""), ParseError);
}

TEST(Corpus, TrimsTextAndIgnoresUnknownFields) {
    auto c = parse(R"({"id":"c1","extra":5,"turns":[{"role":"user","text":"  hi there  ","mood":"ok"}]})");
    EXPECT_EQ(c.conversations()[0].turns[0].text, "hi there");
    std::ostringstream out;
    write_corpus(c, out);
    EXPECT_EQ(out.str().find("extra"), std::string::npos);
    EXPECT_EQ(out.str().find("mood"), std::string::npos);
}

TEST(Corpus, CanonicalSequenceKeepsExistingPrefixes) {
    auto conv = annotated("c", {{SpeakerRole::User, "user ask balance"}, {SpeakerRole::Agent, "bot provide balance"}});
    EXPECT_EQ(canonical_sequence(conv), (std::vector<std::string>{"user ask balance", "bot provide balance"}));
}

TEST(Corpus, CanonicalSequenceAddsRolePrefixes) {
    auto conv = annotated("c", {{SpeakerRole::User, "ask balance"}, {SpeakerRole::Agent, "provide balance"}});
    EXPECT_EQ(canonical_sequence(conv), (std::vector<std::string>{"user ask balance", "bot provide balance"}));
}

TEST(Corpus, CanonicalSequenceCitesUnannotatedTurn) {
    auto conv = annotated("c", {{SpeakerRole::User, "a"}, {SpeakerRole::Agent, "b"}, {SpeakerRole::User, "c"},
                                {SpeakerRole::Agent, "d"}});
    conv.turns[3].canonical_form.reset();
    auto msg = error_of([&] { canonical_sequence(conv); });
    EXPECT_NE(msg.find("turn 3"), std::string::npos) << msg;
}

TEST(Corpus, SaveLoadRoundTripKeepsAnnotatedFlag) {
    cases::TempDir tmp("corpus");
    Corpus c({annotated("a", {{SpeakerRole::User, "user x"}, {SpeakerRole::Agent, "bot y"}}),
              annotated("b", {{SpeakerRole::User, "user z"}}),
              annotated("c", {{SpeakerRole::Agent, "bot w"}, {SpeakerRole::User, "user v"}})});
    save_corpus(c, tmp.path() / "c.jsonl");
    auto back = load_corpus(tmp.path() / "c.jsonl");
    EXPECT_EQ(back, c);
    EXPECT_TRUE(back.annotated());
}

TEST(Corpus, SaveToMissingDirectoryFails) {
    Corpus c({annotated("a", {{SpeakerRole::User, "user x"}})});
    EXPECT_THROW(save_corpus(c, "/nonexistent-dir/for/sure/c.jsonl"), IoError);
}

TEST(Corpus, RandomCorporaRoundTripAndLoadIsIdempotent) {
    cases::Rng rng(5);
    cases::TempDir tmp("corpus-prop");
    for (int iter = 0; iter < 40; ++iter) {
        std::vector<Conversation> convs;
        size_t n = cases::uniform(rng, 1, 6);
        for (size_t i = 0; i < n; ++i) {
            Conversation c;
            c.id = "conv-" + std::to_string(i);
            if (rng() % 2) c.domain = "domain " + std::to_string(rng() % 3);
            size_t turns = cases::uniform(rng, 1, 7);
            SpeakerRole role = rng() % 2 ? SpeakerRole::User : SpeakerRole::Agent;
            bool with_forms = rng() % 2;
            for (size_t t = 0; t < turns; ++t) {
                Turn turn{role, "say \"" + std::to_string(rng() % 100) + "\" \\ ünï", std::nullopt};
                if (with_forms || rng() % 3 == 0) turn.canonical_form = "form " + std::to_string(rng() % 5);
                c.turns.push_back(turn);
                role = role == SpeakerRole::User ? SpeakerRole::Agent : SpeakerRole::User;
            }
            convs.push_back(c);
        }
        Corpus corpus(convs);
        auto path = tmp.path() / "r.jsonl";
        save_corpus(corpus, path);
        auto once = load_corpus(path);
        EXPECT_EQ(once, corpus);
        save_corpus(once, path);
        EXPECT_EQ(load_corpus(path), once);
        for (const auto& c : once.conversations())
            if (c.annotated()) EXPECT_EQ(canonical_sequence(c).size(), c.turns.size());
    }
}

TEST(Corpus, RejectsEmptyCanonicalFormAndLineBreaks) {
    auto conv = annotated("c", {{SpeakerRole::User, "user a"}});
    conv.turns[0].canonical_form = "";
    EXPECT_THROW(Corpus({conv}), ValidationError);
    conv.turns[0].canonical_form = "user a\nb";
    EXPECT_THROW(Corpus({conv}), ValidationError);
}
