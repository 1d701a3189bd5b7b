#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "testutil.hpp"
#include "tubeground/log.hpp"
#include "tubeground/referral.hpp"

using namespace tubeground;
using namespace tubeground::referral;

namespace {

DecomposedQuery decompose_text(const std::string& text, const TagLexicon& lex) {
  const auto tokens = tokenize(text);
  const auto tags = pos_tag(tokens, lex);
  return decompose(tokens, tags, lex);
}

std::string referral_text(const std::string& text, const TagLexicon& lex) {
  const auto tokens = tokenize(text);
  const auto tags = pos_tag(tokens, lex);
  return join_tokens(tokens, extract_referral(tokens, tags, lex));
}

std::set<std::string> action_set(const std::string& text, const TagLexicon& lex) {
  const auto tokens = tokenize(text);
  const auto tags = pos_tag(tokens, lex);
  const auto span = extract_referral(tokens, tags, lex);
  std::set<std::string> out;
  for (const std::size_t v : extract_actions(tokens, tags, span, lex)) {
    out.insert(tokens[v]);
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize strips edge punctuation and keeps casing") {
  const auto toks = tokenize("The man, walks; to-door. 'hers'");
  CHECK(toks == std::vector<std::string>{"The", "man", "walks", "to-door", "'hers'"});
  CHECK(tokenize("...").empty());
}

TEST_CASE("pos_tag: lexicon, suffix rules, default") {
  const TagLexicon lex = TagLexicon::builtin();
  CHECK(lex.lookup("man") == PosTag::Noun);
  CHECK(lex.lookup("walks") == PosTag::Verb);    // -s after a known verb stem
  CHECK(lex.lookup("pushes") == PosTag::Verb);   // -es
  CHECK(lex.lookup("walking") == PosTag::Verb);  // -ing
  CHECK(lex.lookup("hats") == PosTag::Noun);     // noun plural
  CHECK(lex.lookup("older") == PosTag::Adj);     // comparative
  CHECK(lex.lookup("zxqv") == PosTag::Other);    // unknown
  CHECK(lex.lookup("Bearded") == PosTag::Adj);   // case-insensitive
}

TEST_CASE("lexicon file extends the builtin set") {
  const auto path = std::filesystem::temp_directory_path() / "tubeground_lexicon_test.tsv";
  {
    std::ofstream os(path);
    os << "zxqv\tNOUN\n";
    os << "# comment line\n";
    os << "man\tVERB\n";  // overrides builtin
  }
  const TagLexicon lex = TagLexicon::from_file(path);
  CHECK(lex.lookup("zxqv") == PosTag::Noun);
  CHECK(lex.lookup("man") == PosTag::Verb);
  CHECK(lex.lookup("woman") == PosTag::Noun);  // builtin still present
  std::filesystem::remove(path);
}

TEST_CASE("extract_referral reproduces the reference answers") {
  const TagLexicon lex = TagLexicon::builtin();
  CHECK(referral_text(
            "The bearded woman walks to the woman in gray clothes and touches her face.",
            lex) == "The bearded woman");
  CHECK(referral_text("The man in the brown hat drops the hat of the man in the black hat "
                      "then pushes the opposite man then turns and punches the man in the back.",
                      lex) == "The man in the brown hat");
  CHECK(referral_text("The woman with yellow hair walks from the right to the left of the "
                      "man in leather then pulls his arm away.",
                      lex) == "The woman with yellow hair");
}

TEST_CASE("extract_referral fallback warns and returns the whole query") {
  const TagLexicon lex = TagLexicon::builtin();
  std::string warned;
  logging::set_warn_handler([&](const std::string& m) { warned = m; });
  const auto tokens = tokenize("quickly zx qv");
  const auto tags = pos_tag(tokens, lex);
  const TokenSpan span = extract_referral(tokens, tags, lex);
  logging::reset_warn_handler();
  CHECK(span.begin == 0);
  CHECK(span.end == tokens.size());
  CHECK_FALSE(warned.empty());
}

TEST_CASE("extract_actions collects the referral's clause chain") {
  const TagLexicon lex = TagLexicon::builtin();

  SUBCASE("multi-verb chain without connectors") {
    const auto verbs = action_set(
        "The bald man leaves the room pulls the door walks towards the man in the white "
        "suit and then turns to face the white suit man.",
        lex);
    CHECK(verbs == std::set<std::string>{"leaves", "pulls", "walks", "turns"});
  }

  SUBCASE("two-verb chain joined by and") {
    const auto verbs = action_set(
        "The bearded woman walks to the woman in gray clothes and touches her face.", lex);
    CHECK(verbs == std::set<std::string>{"walks", "touches"});
  }

  SUBCASE("no verbs yields an empty set with a warning") {
    std::string warned;
    logging::set_warn_handler([&](const std::string& m) { warned = m; });
    const auto verbs = action_set("The tall man in the black hat.", lex);
    logging::reset_warn_handler();
    CHECK(verbs.empty());
    CHECK(!warned.empty());
  }

  SUBCASE("passive and infinitive forms are excluded") {
    const auto verbs = action_set(
        "The man in the black military uniform catches the things thrown by the opposite "
        "man with both hands turns and bends over to pick up his hat and puts on it.",
        lex);
    CHECK(verbs.count("catches") == 1);
    CHECK(verbs.count("thrown") == 0);
    CHECK(verbs.count("throws") == 0);
    CHECK(verbs.count("pick") == 0);  // "to pick" is an infinitive
    CHECK(verbs.count("turns") == 1);
    CHECK(verbs.count("bends") == 1);
    CHECK(verbs.count("puts") == 1);
  }
}

TEST_CASE("decompose produces referral-anchored local queries") {
  const TagLexicon lex = TagLexicon::builtin();

  SUBCASE("reference local query") {
    const auto d = decompose_text(
        "The bald man leaves the room pulls the door walks towards the man in the white "
        "suit and then turns to face the white suit man.",
        lex);
    REQUIRE(d.local_queries.size() == 4);
    CHECK(d.local_queries[0].text == "The bald man leaves the room");
    CHECK(d.local_queries[1].text == "The bald man pulls the door");
    CHECK(d.local_queries[2].text == "The bald man walks towards the man in the white suit");
    CHECK(d.local_queries[3].text == "The bald man turns to face the white suit man");
  }

  SUBCASE("object span stops before the next chained verb") {
    const auto d = decompose_text(
        "The bearded woman walks to the woman in gray clothes and touches her face.", lex);
    REQUIRE(d.local_queries.size() == 2);
    CHECK(d.local_queries[0].text ==
          "The bearded woman walks to the woman in gray clothes");
    CHECK(d.local_queries[1].text == "The bearded woman touches her face");
  }

  SUBCASE("degenerate single-noun query") {
    const auto d = decompose_text("man", lex);
    REQUIRE(d.local_queries.size() == 1);
    CHECK(d.local_queries[0].text == "man");
    CHECK(d.global_positions == std::vector<std::size_t>{0});
    CHECK(d.background.empty());
    CHECK(d.action_verbs.empty());
  }

  SUBCASE("every local query starts with the referral phrase") {
    const auto queries = {
        "The bald man leaves the room pulls the door walks towards the man in the white "
        "suit and then turns to face the white suit man.",
        "The bearded woman walks to the woman in gray clothes and touches her face.",
        "The woman with yellow hair walks from the right to the left of the man in "
        "leather then pulls his arm away.",
    };
    for (const auto* q : queries) {
      const auto tokens = tokenize(q);
      const auto tags = pos_tag(tokens, lex);
      const auto d = decompose(tokens, tags, lex);
      const std::string ref = join_tokens(tokens, d.referral);
      for (const auto& lq : d.local_queries) {
        CHECK(lq.text.substr(0, ref.size()) == ref);
      }
    }
  }
}

TEST_CASE("decompose partitions every token exactly once") {
  const TagLexicon lex = TagLexicon::builtin();
  const auto check_partition = [&](const std::string& text) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return;
    const auto tags = pos_tag(tokens, lex);
    const auto d = decompose(tokens, tags, lex);
    std::vector<int> covered(tokens.size(), 0);
    for (std::size_t i = d.referral.begin; i < d.referral.end; ++i) covered[i] += 1;
    for (const std::size_t v : d.action_verbs) covered[v] += 1;
    for (const auto& span : d.background) {
      for (std::size_t i = span.begin; i < span.end; ++i) covered[i] += 1;
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      INFO(text, " token ", i, " ", tokens[i]);
      CHECK(covered[i] == 1);
    }
  };

  check_partition("The bearded woman walks to the woman in gray clothes and touches her face.");
  check_partition("The man in the brown hat drops the hat of the man in the black hat then "
                  "pushes the opposite man then turns and punches the man in the back.");
  check_partition("man");
  check_partition("quickly zx qv");

  // Generated corpus: templated human-activity phrases.
  std::mt19937_64 rng(21);
  const std::vector<std::string> adjs = {"tall", "old", "red", "bearded", "young"};
  const std::vector<std::string> nouns = {"man", "woman", "boy", "girl", "person"};
  const std::vector<std::string> verbs = {"walks", "runs", "turns", "jumps", "waves"};
  for (int i = 0; i < 100; ++i) {
    const std::string q = "the " + adjs[rng() % adjs.size()] + " " +
                          nouns[rng() % nouns.size()] + " " + verbs[rng() % verbs.size()] +
                          " to the " + adjs[rng() % adjs.size()] + " " +
                          nouns[rng() % nouns.size()] + " and " + verbs[rng() % verbs.size()] +
                          " away";
    check_partition(q);
  }
}

TEST_CASE("decompose is deterministic") {
  const TagLexicon lex = TagLexicon::builtin();
  const std::string q =
      "The woman with yellow hair walks from the right to the left of the man in leather "
      "then pulls his arm away.";
  const auto a = decompose_text(q, lex);
  const auto b = decompose_text(q, lex);
  CHECK(a.referral == b.referral);
  CHECK(a.action_verbs == b.action_verbs);
  CHECK(a.global_positions == b.global_positions);
  REQUIRE(a.local_queries.size() == b.local_queries.size());
  for (std::size_t i = 0; i < a.local_queries.size(); ++i) {
    CHECK(a.local_queries[i].text == b.local_queries[i].text);
  }
}

TEST_CASE("global positions are referral nouns/adjectives plus chain verbs") {
  const TagLexicon lex = TagLexicon::builtin();
  const std::string q = "The bearded woman walks to the man and touches his arm";
  const auto tokens = tokenize(q);
  const auto tags = pos_tag(tokens, lex);
  const auto d = decompose(tokens, tags, lex);
  // bearded(1) woman(2) walks(3) touches(8)
  CHECK(d.global_positions == std::vector<std::size_t>{1, 2, 3, 8});
  for (const std::size_t i : d.global_positions) {
    CHECK((tags[i] == PosTag::Noun || tags[i] == PosTag::Adj || tags[i] == PosTag::Verb));
  }
}

TEST_CASE("local queries respect the word limit") {
  const TagLexicon lex = TagLexicon::builtin();
  std::string q = "The tall man walks";
  for (int i = 0; i < 40; ++i) q += " to the door";
  const auto tokens = tokenize(q);
  const auto tags = pos_tag(tokens, lex);
  const auto d = decompose(tokens, tags, lex, 25);
  for (const auto& lq : d.local_queries) {
    CHECK(lq.source_indices.size() <= 25);
  }
}
