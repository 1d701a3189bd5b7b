#include "tubeground/referral.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "tubeground/errors.hpp"
#include "tubeground/log.hpp"

namespace tubeground::referral {
namespace {

const std::set<std::string> kDeterminers = {"the", "a", "an", "his", "her", "its", "their"};
const std::set<std::string> kAttributePreps = {"in", "with"};
const std::set<std::string> kSubordinators = {"while", "when", "because", "whereas",
                                              "who", "that", "which"};

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) && c != '-' && c != '\'';
}

const char* const kNouns[] = {
    "man", "men", "woman", "women", "person", "people", "boy", "girl", "child",
    "children", "kid", "lady", "guy", "who", "what", "he", "she", "face", "hair",
    "beard", "hat", "cap", "coat", "suit", "dress", "shirt", "jacket", "uniform",
    "clothes", "scarf", "glasses", "tie", "shoe", "shoes", "bag", "room", "door",
    "window", "wall", "floor", "table", "chair", "bench", "sofa", "bed", "stone",
    "arm", "hand", "hands", "head", "leg", "shoulder", "back", "thing", "things",
    "box", "book", "cup", "glass", "bottle", "phone", "car", "street", "road",
    "ground", "stairs", "side", "front", "leather", "left", "right", "corner",
    "top", "middle", "end", "paper", "towel", "umbrella", "stick", "ball",
};

const char* const kAdjectives[] = {
    "bearded", "bald",  "gray",   "grey",  "yellow", "brown",  "black", "white",
    "red",     "blue",  "green",  "pink",  "purple", "orange", "old",   "young",
    "tall",    "short", "big",    "small", "little", "long",   "fat",   "thin",
    "opposite", "main", "other",  "dark",  "light",  "striped", "plaid",
    "military", "elderly", "curly",
};

const char* const kVerbs[] = {
    "walk",  "run",   "touch", "leave", "pull",  "push",  "turn",  "drop",
    "punch", "catch", "bend",  "put",   "pick",  "throw", "hold",  "stop",
    "go",    "stand", "sit",   "take",  "give",  "move",  "look",  "grab",
    "open",  "close", "raise", "lift",  "carry", "jump",  "kick",  "hit",
    "slap",  "hug",   "kiss",  "speak", "talk",  "point", "wave",  "nod",
    "shake", "smile", "laugh", "cry",   "eat",   "drink", "read",  "write",
    "play",  "step",  "reach", "pass",  "enter", "exit",  "approach", "follow",
    "chase", "lean",  "climb", "wipe",  "wear",  "face",
};

// Irregular past participles that must never count as active verbs.
const std::set<std::string> kPastParticiples = {"thrown", "worn",  "held", "taken",
                                                "given",  "caught", "put",  "gone"};

}  // namespace

TagLexicon TagLexicon::builtin() {
  TagLexicon lex;
  for (const char* w : kNouns) lex.add(w, PosTag::Noun);
  for (const char* w : kAdjectives) lex.add(w, PosTag::Adj);
  for (const char* w : kVerbs) lex.add(w, PosTag::Verb);
  // "face" reads as a noun in these queries ("her face"); the verb sense
  // only appears in infinitives, which the action filter drops anyway.
  lex.add("face", PosTag::Noun);
  lex.add("put", PosTag::Verb);
  return lex;
}

TagLexicon TagLexicon::from_file(const std::filesystem::path& path, bool extend_builtin) {
  TagLexicon lex = extend_builtin ? builtin() : TagLexicon{};
  std::ifstream is(path);
  if (!is) throw DataError("cannot open lexicon file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("lexicon line " + std::to_string(lineno) + " is not word<TAB>tag");
    }
    lex.add(lower(line.substr(0, tab)), pos_tag_from_string(line.substr(tab + 1)));
  }
  return lex;
}

void TagLexicon::add(const std::string& word, PosTag tag) {
  entries_[lower(word)] = tag;
}

PosTag TagLexicon::lookup(const std::string& word) const {
  const std::string w = lower(word);
  if (const auto it = entries_.find(w); it != entries_.end()) return it->second;

  // Suffix rules, in order: verb inflections, then noun plurals, then
  // adjective comparatives.
  const auto stem_is = [&](const std::string& stem, PosTag tag) {
    const auto it = entries_.find(stem);
    return it != entries_.end() && it->second == tag;
  };
  if (w.size() > 4 && w.ends_with("ing")) {
    const std::string stem = w.substr(0, w.size() - 3);
    if (stem_is(stem, PosTag::Verb) || stem_is(stem + "e", PosTag::Verb)) return PosTag::Verb;
    if (stem.size() > 1 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
        stem_is(stem.substr(0, stem.size() - 1), PosTag::Verb)) {
      return PosTag::Verb;
    }
  }
  if (w.size() > 3 && w.ends_with("ed")) {
    const std::string stem = w.substr(0, w.size() - 2);
    if (stem_is(stem, PosTag::Verb) || stem_is(stem + "e", PosTag::Verb) ||
        stem_is(w.substr(0, w.size() - 1), PosTag::Verb)) {
      return PosTag::Verb;
    }
  }
  if (w.size() > 3 && w.ends_with("es")) {
    const std::string stem = w.substr(0, w.size() - 2);
    if (stem_is(stem, PosTag::Verb)) return PosTag::Verb;
    if (stem_is(stem, PosTag::Noun)) return PosTag::Noun;
  }
  if (w.size() > 2 && w.ends_with('s')) {
    const std::string stem = w.substr(0, w.size() - 1);
    if (stem_is(stem, PosTag::Verb)) return PosTag::Verb;
    if (stem_is(stem, PosTag::Noun)) return PosTag::Noun;
  }
  if (w.size() > 3 && (w.ends_with("er") || w.ends_with("est"))) {
    const std::string stem = w.substr(0, w.size() - (w.ends_with("est") ? 3 : 2));
    if (stem_is(stem, PosTag::Adj)) return PosTag::Adj;
  }
  return PosTag::Other;
}

bool TagLexicon::has_stem(const std::string& word, PosTag tag) const {
  const auto it = entries_.find(lower(word));
  return it != entries_.end() && it->second == tag;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string raw;
  while (is >> raw) {
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && is_punct(raw[b])) ++b;
    while (e > b && is_punct(raw[e - 1])) --e;
    if (e > b) out.push_back(raw.substr(b, e - b));
  }
  return out;
}

std::vector<PosTag> pos_tag(const std::vector<std::string>& tokens,
                            const TagLexicon& lexicon) {
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  for (const std::string& tok : tokens) tags.push_back(lexicon.lookup(tok));
  return tags;
}

bool is_active_present_verb(const std::string& token, const TagLexicon& lexicon) {
  const std::string w = lower(token);
  if (kPastParticiples.count(w)) return false;
  if (w.ends_with("ing")) return false;
  if (!w.ends_with('s')) return false;
  if (w.size() > 3 && w.ends_with("es") &&
      lexicon.has_stem(w.substr(0, w.size() - 2), PosTag::Verb)) {
    return true;
  }
  return w.size() > 2 && lexicon.has_stem(w.substr(0, w.size() - 1), PosTag::Verb);
}

namespace {

/// Absorbs an adjective/noun run starting at i; returns one past the last
/// noun, or begin if the run contains no noun.
std::size_t absorb_np_run(const std::vector<PosTag>& tags, std::size_t i,
                          std::size_t n) {
  std::size_t last_noun = 0;
  bool has_noun = false;
  std::size_t j = i;
  while (j < n && (tags[j] == PosTag::Adj || tags[j] == PosTag::Noun)) {
    if (tags[j] == PosTag::Noun) {
      last_noun = j;
      has_noun = true;
    }
    ++j;
  }
  return has_noun ? last_noun + 1 : i;
}

}  // namespace

TokenSpan extract_referral(const std::vector<std::string>& tokens,
                           const std::vector<PosTag>& tags, const TagLexicon&) {
  if (tokens.empty()) throw ContractViolation("extract_referral: empty token list");
  const std::size_t n = tokens.size();

  std::size_t i = 0;
  if (kDeterminers.count(lower(tokens[0]))) i = 1;
  std::size_t end = absorb_np_run(tags, i, n);
  if (end == i) {
    logging::warn("no referral noun found; using the whole query as referral");
    return {0, n};
  }

  // Attribute continuations: "in"/"with" followed by a noun phrase.
  for (;;) {
    if (end >= n || !kAttributePreps.count(lower(tokens[end]))) break;
    std::size_t j = end + 1;
    if (j < n && kDeterminers.count(lower(tokens[j]))) ++j;
    const std::size_t np_end = absorb_np_run(tags, j, n);
    if (np_end == j) break;  // dangling preposition, leave it out
    end = np_end;
  }
  return {0, end};
}

std::vector<std::size_t> extract_actions(const std::vector<std::string>& tokens,
                                         const std::vector<PosTag>& tags,
                                         const TokenSpan& referral,
                                         const TagLexicon& lexicon) {
  std::vector<std::size_t> verbs;
  for (std::size_t i = referral.end; i < tokens.size(); ++i) {
    const std::string w = lower(tokens[i]);
    if (kSubordinators.count(w)) break;  // another agent's clause starts
    if (tags[i] != PosTag::Verb) continue;
    if (i > 0 && lower(tokens[i - 1]) == "to") continue;  // infinitive
    if (!is_active_present_verb(tokens[i], lexicon)) continue;
    verbs.push_back(i);
  }
  if (verbs.empty()) {
    logging::warn("no action verbs found in query");
  }
  return verbs;
}

std::string join_tokens(const std::vector<std::string>& tokens, const TokenSpan& span) {
  std::string out;
  for (std::size_t i = span.begin; i < span.end && i < tokens.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

DecomposedQuery decompose(const std::vector<std::string>& tokens,
                          const std::vector<PosTag>& tags, const TagLexicon& lexicon,
                          std::size_t max_words) {
  if (tokens.size() != tags.size()) {
    throw ContractViolation("decompose: token/tag size mismatch");
  }
  if (tokens.empty()) throw ContractViolation("decompose: empty query");

  DecomposedQuery out;
  out.referral = extract_referral(tokens, tags, lexicon);
  out.referral_fallback = out.referral.size() == tokens.size() &&
                          std::none_of(tags.begin() + static_cast<std::ptrdiff_t>(out.referral.begin),
                                       tags.begin() + static_cast<std::ptrdiff_t>(out.referral.end),
                                       [](PosTag t) { return t == PosTag::Noun; });
  out.action_verbs = extract_actions(tokens, tags, out.referral, lexicon);

  // Global positions: referral nouns/adjectives plus the chained verbs, all
  // as original-query indices.
  for (std::size_t i = out.referral.begin; i < out.referral.end; ++i) {
    if (tags[i] == PosTag::Noun || tags[i] == PosTag::Adj) out.global_positions.push_back(i);
  }
  for (const std::size_t v : out.action_verbs) out.global_positions.push_back(v);

  // Local queries: referral + verb + the verb's object span. An object span
  // runs to the next chained verb, excluding its connector tokens.
  const std::string referral_text = join_tokens(tokens, out.referral);
  const std::vector<std::size_t> referral_indices = [&] {
    std::vector<std::size_t> idx;
    for (std::size_t i = out.referral.begin; i < out.referral.end; ++i) idx.push_back(i);
    return idx;
  }();
  const auto is_connector = [&](std::size_t i) {
    const std::string w = lower(tokens[i]);
    return w == "and" || w == "then";
  };
  for (std::size_t vi = 0; vi < out.action_verbs.size(); ++vi) {
    const std::size_t v = out.action_verbs[vi];
    std::size_t obj_end = tokens.size();
    if (vi + 1 < out.action_verbs.size()) {
      obj_end = out.action_verbs[vi + 1];
      while (obj_end > v + 1 && is_connector(obj_end - 1)) --obj_end;
    }
    LocalQuery lq;
    lq.source_indices = referral_indices;
    lq.source_indices.push_back(v);
    for (std::size_t i = v + 1; i < obj_end; ++i) lq.source_indices.push_back(i);
    if (lq.source_indices.size() > max_words) lq.source_indices.resize(max_words);
    std::string text;
    for (const std::size_t i : lq.source_indices) {
      if (!text.empty()) text += ' ';
      text += tokens[i];
    }
    lq.text = std::move(text);
    out.local_queries.push_back(std::move(lq));
  }
  if (out.local_queries.empty()) {
    LocalQuery lq;
    lq.text = referral_text;
    lq.source_indices = referral_indices;
    if (lq.source_indices.size() > max_words) lq.source_indices.resize(max_words);
    out.local_queries.push_back(std::move(lq));
  }

  // Background: maximal uncovered runs.
  std::vector<bool> covered(tokens.size(), false);
  for (std::size_t i = out.referral.begin; i < out.referral.end; ++i) covered[i] = true;
  for (const std::size_t v : out.action_verbs) covered[v] = true;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (covered[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < tokens.size() && !covered[j]) ++j;
    out.background.push_back({i, j});
    i = j;
  }
  return out;
}

DecomposedQuery decompose(const QueryEmbedding& query, const TagLexicon& lexicon,
                          std::size_t max_words) {
  return decompose(query.tokens, query.pos_tags, lexicon, max_words);
}

}  // namespace tubeground::referral
