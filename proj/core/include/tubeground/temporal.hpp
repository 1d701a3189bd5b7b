#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "tubeground/graph.hpp"
#include "tubeground/nn.hpp"
#include "tubeground/referral.hpp"
#include "tubeground/types.hpp"

namespace tubeground {

/// Token table. Line number = id; line 0 is reserved for the mask token and
/// line 1 for unknowns.
class Vocabulary {
 public:
  static constexpr std::int64_t kMaskId = 0;
  static constexpr std::int64_t kUnkId = 1;

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);
  static Vocabulary from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  std::int64_t id(const std::string& token) const;
  const std::string& token(std::int64_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> ids_;
};

struct MaskedQuery {
  std::vector<std::int64_t> ids;               // mask id at masked positions
  std::vector<std::size_t> masked_positions;
  std::vector<std::int64_t> original_ids;      // one per masked position

  bool trainable() const { return !masked_positions.empty(); }
};

/// Replaces every NOUN/ADJ/VERB token with the mask token. A query with no
/// maskable token yields an untrainable MaskedQuery and a warning.
MaskedQuery mask_query(const std::vector<std::string>& tokens,
                       const std::vector<PosTag>& tags, const Vocabulary& vocab);
MaskedQuery mask_query(const QueryEmbedding& query, const Vocabulary& vocab);

struct TemporalConfig {
  std::size_t clip_dim = 1024;
  std::size_t word_dim = 768;
  std::size_t model_dim = 256;
  std::size_t hidden_dim = 256;
  std::size_t max_words = 25;
  std::size_t decoder_blocks = 1;
  std::int64_t clip_len = 16;
  double tau = 0.5;
  /// When set, unmasked positions contribute loss terms as well.
  bool score_all_positions = false;
  std::uint64_t seed = 977;
};

struct HighlightVars {
  Var memory;    // C x model_dim, salience-weighted clip values
  Var salience;  // C, non-negative, sums to 1
};

class TemporalModel {
 public:
  TemporalModel(TemporalConfig config, std::size_t vocab_size);

  const TemporalConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::vector<Parameter*> parameters();
  void zero_grad();

  /// Cross attention with words as queries and clips as keys/values.
  /// salience[c] is the mean over words of the word->clip attention weight.
  HighlightVars highlight(Graph& g, Var clips, Var words);

  /// Plain-tensor salience for inference.
  Tensor clip_salience(const Tensor& clips, const Tensor& words);

  /// Decoder input embeddings for a (possibly masked) token id sequence.
  Var embed_tokens(Graph& g, const std::vector<std::int64_t>& ids);

  /// Negative log-likelihood of the original tokens at the masked positions,
  /// reconstructed causally from the highlighted memory.
  Var reconstruction_loss(Graph& g, Var memory, const MaskedQuery& masked);

  /// Batch convenience: mean loss over items, with backward.
  struct BatchItem {
    Tensor clips;  // C x clip_dim
    Tensor words;  // N x word_dim
    MaskedQuery masked;
  };
  double reconstruction_loss_backward(const std::vector<BatchItem>& batch);

  nn::DecoderParams& decoder() { return decoder_; }

 private:
  TemporalConfig config_;
  std::size_t vocab_size_ = 0;
  Parameter ca_wq_;   // word_dim x model_dim
  Parameter ca_wk_;   // clip_dim x model_dim
  Parameter ca_wv_;   // clip_dim x model_dim
  Parameter tok_emb_; // vocab x model_dim (row 0 is the mask embedding)
  Parameter pos_emb_; // max_words x model_dim
  nn::DecoderParams decoder_;
};

/// Highest-total-salience contiguous clip run at or above tau * max salience,
/// mapped to frame bounds; ties break to the earliest run.
FrameInterval predict_bounds(const Tensor& salience, std::int64_t video_length,
                             std::int64_t clip_len, double tau = 0.5);

}  // namespace tubeground
