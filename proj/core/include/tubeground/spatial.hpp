#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tubeground/graph.hpp"
#include "tubeground/linker.hpp"
#include "tubeground/nn.hpp"
#include "tubeground/referral.hpp"
#include "tubeground/types.hpp"

namespace tubeground {

struct SpatialConfig {
  std::size_t tubelet_dim = 256;
  std::size_t word_dim = 768;
  std::size_t proj_dim = 256;
  std::size_t hidden_dim = 256;

  /// Auto shares the tubelet value projection with the word projection when
  /// the embedding dims agree (the notation of the compatibility score reads
  /// that way); otherwise a separate word projection is created.
  enum class WordProjection { Auto, Shared, Separate };
  WordProjection word_projection = WordProjection::Auto;

  enum class Negatives { CrossVideo, WithinVideo };
  Negatives negatives = Negatives::CrossVideo;

  /// Exclusive leaves the positive score out of the denominator.
  enum class Denominator { Exclusive, Inclusive };
  Denominator denominator = Denominator::Exclusive;

  /// Cosine-normalized compatibility and attention scores with a shared
  /// temperature. The literal dot-product forms are the defaults; the
  /// normalized variants keep the contrastive objective bounded so attention
  /// stays soft while training.
  bool normalize_compat = false;
  bool normalize_attention = false;
  double temperature = 0.2;

  std::uint64_t seed = 811;
};

/// Word-to-tubelet attention with per-word compatibility scores.
struct AttentionMap {
  Tensor weights;        // K x N; each column sums to 1 over valid tubelets
  Tensor compat_scores;  // N
  std::vector<bool> tubelet_valid;
};

/// Index of the tubelet with the highest mean attention weight across words;
/// ties break to the lower index.
std::size_t select_tubelet(const AttentionMap& map);

class SpatialModel {
 public:
  explicit SpatialModel(SpatialConfig config);

  const SpatialConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  void zero_grad();

  /// Temporal self-attention per tubelet followed by a masked mean-pool over
  /// valid frames; returns a K x tubelet_dim matrix. Tubelets with no valid
  /// sampled frame are flagged invalid (and warned about).
  Var enhance_tubelets(Graph& g, const TubeletFeatureTensor& feats,
                       std::vector<bool>& tubelet_valid);

  struct AttentionVars {
    Var weights_cols;  // N x K row-softmax layout (rows = words)
    Var compat;        // N
  };
  AttentionVars attention(Graph& g, Var pooled, const std::vector<bool>& tubelet_valid,
                          Var words);

  /// Plain-tensor inference wrapper.
  AttentionMap attention_map(const TubeletFeatureTensor& feats, const Tensor& words);

  struct BatchItem {
    const TubeletFeatureTensor* features = nullptr;
    Tensor words;  // N x word_dim
  };

  /// Batch contrastive loss: each item's own compatibility scores are the
  /// positives; the same words paired with every other item's tubelets give
  /// the negatives. Requires batch size >= 2 in cross-video mode.
  Var spatial_loss(Graph& g, const std::vector<BatchItem>& batch);

  /// Convenience: forward + backward, gradients accumulate into parameters.
  double spatial_loss_backward(const std::vector<BatchItem>& batch);

 private:
  Var word_value_projection(Graph& g, Var words);
  Var compat_scores(Graph& g, Var word_proj, Var aggregated) const;
  Var attention_scores(Graph& g, Var proj_q, Var proj_k) const;

  SpatialConfig config_;
  bool share_word_projection_ = false;
  nn::TemporalSelfAttentionParams tsa_;
  nn::MlpParams mlp_q_;
  nn::MlpParams mlp_k_;
  nn::MlpParams mlp_v_;
  nn::MlpParams word_value_;  // used when not shared
};

/// Stacks the referral word rows (global positions, then each local query's
/// source rows) of a decomposed query into the loss word matrix. An empty
/// decomposition falls back to the original embeddings with a warning.
Tensor referral_word_matrix(const QueryEmbedding& query,
                            const referral::DecomposedQuery& decomp);

}  // namespace tubeground
