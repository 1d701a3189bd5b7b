#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "tubeground/types.hpp"

namespace tubeground::referral {

/// Deterministic word -> tag lookup with ordered suffix fallbacks.
/// Exact lexicon entries win; suffix rules match inflected forms against
/// known stems; everything else is OTHER.
class TagLexicon {
 public:
  /// Built-in lexicon covering person nouns, clothing/colour adjectives and
  /// motion/contact verbs common in human-activity grounding queries.
  static TagLexicon builtin();

  /// Loads word<TAB>tag lines, extending (and overriding) the builtin set.
  static TagLexicon from_file(const std::filesystem::path& path, bool extend_builtin = true);

  void add(const std::string& word, PosTag tag);
  PosTag lookup(const std::string& word) const;
  bool has_stem(const std::string& word, PosTag tag) const;

 private:
  std::unordered_map<std::string, PosTag> entries_;
};

/// Lowercases, splits on whitespace and strips edge punctuation. Tokens that
/// are pure punctuation are dropped; original casing is preserved in the
/// returned tokens.
std::vector<std::string> tokenize(const std::string& text);

std::vector<PosTag> pos_tag(const std::vector<std::string>& tokens,
                            const TagLexicon& lexicon);

/// True for third-person-singular present forms ("walks", "pushes") resolved
/// against a known verb stem.
bool is_active_present_verb(const std::string& token, const TagLexicon& lexicon);

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool operator==(const TokenSpan&) const = default;
};

struct LocalQuery {
  std::string text;
  /// Positions of each local-query token within the original query.
  std::vector<std::size_t> source_indices;
};

struct DecomposedQuery {
  TokenSpan referral;                       // subject + attribute span
  std::vector<std::size_t> action_verbs;    // token indices of chained verbs
  std::vector<TokenSpan> background;        // everything else
  std::vector<LocalQuery> local_queries;    // referral + verb + object phrases
  std::vector<std::size_t> global_positions;  // referral noun/adj + verb indices
  bool referral_fallback = false;           // no noun found, whole query used

  bool empty() const { return referral.empty() && local_queries.empty(); }
};

/// First maximal noun phrase of the query: optional determiner, a run of
/// adjectives/nouns, plus "in"/"with" attribute continuations up to their
/// head noun. Falls back to the whole query (with a warning) when no noun
/// exists.
TokenSpan extract_referral(const std::vector<std::string>& tokens,
                           const std::vector<PosTag>& tags, const TagLexicon& lexicon);

/// Active present-tense verbs governed by the referral subject: scanning
/// stops at subordinators and relative pronouns; infinitives ("to face") and
/// participles ("thrown") are excluded.
std::vector<std::size_t> extract_actions(const std::vector<std::string>& tokens,
                                         const std::vector<PosTag>& tags,
                                         const TokenSpan& referral,
                                         const TagLexicon& lexicon);

DecomposedQuery decompose(const std::vector<std::string>& tokens,
                          const std::vector<PosTag>& tags, const TagLexicon& lexicon,
                          std::size_t max_words = 25);

DecomposedQuery decompose(const QueryEmbedding& query, const TagLexicon& lexicon,
                          std::size_t max_words = 25);

std::string join_tokens(const std::vector<std::string>& tokens, const TokenSpan& span);

}  // namespace tubeground::referral
