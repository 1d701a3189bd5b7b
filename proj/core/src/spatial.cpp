#include "tubeground/spatial.hpp"

#include <algorithm>
#include <cmath>

#include "tubeground/errors.hpp"
#include "tubeground/log.hpp"

namespace tubeground {

SpatialModel::SpatialModel(SpatialConfig config) : config_(config) {
  std::mt19937_64 rng(config_.seed);
  switch (config_.word_projection) {
    case SpatialConfig::WordProjection::Shared:
      if (config_.word_dim != config_.tubelet_dim) {
        throw ConfigError("shared word projection requires word_dim == tubelet_dim");
      }
      share_word_projection_ = true;
      break;
    case SpatialConfig::WordProjection::Separate:
      share_word_projection_ = false;
      break;
    case SpatialConfig::WordProjection::Auto:
      share_word_projection_ = config_.word_dim == config_.tubelet_dim;
      break;
  }
  tsa_ = nn::TemporalSelfAttentionParams("spatial.tsa", config_.tubelet_dim, rng);
  mlp_q_ = nn::MlpParams("spatial.mlp_q", config_.word_dim, config_.hidden_dim,
                         config_.proj_dim, rng);
  mlp_k_ = nn::MlpParams("spatial.mlp_k", config_.tubelet_dim, config_.hidden_dim,
                         config_.proj_dim, rng);
  mlp_v_ = nn::MlpParams("spatial.mlp_v", config_.tubelet_dim, config_.hidden_dim,
                         config_.proj_dim, rng);
  if (!share_word_projection_) {
    word_value_ = nn::MlpParams("spatial.word_value", config_.word_dim,
                                config_.hidden_dim, config_.proj_dim, rng);
  }
}

std::vector<Parameter*> SpatialModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : tsa_.parameters()) out.push_back(p);
  for (Parameter* p : mlp_q_.parameters()) out.push_back(p);
  for (Parameter* p : mlp_k_.parameters()) out.push_back(p);
  for (Parameter* p : mlp_v_.parameters()) out.push_back(p);
  if (!share_word_projection_) {
    for (Parameter* p : word_value_.parameters()) out.push_back(p);
  }
  return out;
}

void SpatialModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Var SpatialModel::word_value_projection(Graph& g, Var words) {
  return nn::mlp(g, words, share_word_projection_ ? mlp_v_ : word_value_);
}

Var SpatialModel::enhance_tubelets(Graph& g, const TubeletFeatureTensor& feats,
                                   std::vector<bool>& tubelet_valid) {
  const std::size_t frames = feats.features.dim(0);
  const std::size_t k = feats.features.dim(1);
  const std::size_t dim = feats.features.dim(2);
  if (dim != config_.tubelet_dim) {
    throw ContractViolation("enhance_tubelets: feature dim " + std::to_string(dim) +
                            " != configured " + std::to_string(config_.tubelet_dim));
  }
  tubelet_valid.assign(k, false);
  std::vector<Var> pooled_rows;
  pooled_rows.reserve(k);
  for (std::size_t ki = 0; ki < k; ++ki) {
    Tensor seq({frames, dim});
    std::vector<bool> valid(frames, false);
    std::size_t n_valid = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      if (feats.valid.at(t, ki) != 0.0) {
        valid[t] = true;
        ++n_valid;
        for (std::size_t d = 0; d < dim; ++d) seq.at(t, d) = feats.features.at(t, ki, d);
      }
    }
    if (n_valid == 0) {
      logging::warn("tubelet " + std::to_string(ki) +
                    " covers no sampled frame; excluded from attention");
      pooled_rows.push_back(g.constant(Tensor({1, dim})));
      continue;
    }
    tubelet_valid[ki] = true;
    Var enhanced = nn::temporal_self_attention(g, g.constant(std::move(seq)), valid, tsa_);
    // Masked mean-pool over valid frames.
    Tensor pool_row({1, frames});
    for (std::size_t t = 0; t < frames; ++t) {
      pool_row.at(0, t) = valid[t] ? 1.0 / static_cast<double>(n_valid) : 0.0;
    }
    pooled_rows.push_back(g.matmul(g.constant(std::move(pool_row)), enhanced));
  }
  return g.concat_rows(pooled_rows);
}

SpatialModel::AttentionVars SpatialModel::attention(Graph& g, Var pooled,
                                                    const std::vector<bool>& tubelet_valid,
                                                    Var words) {
  const std::size_t k = g.value(pooled).dim(0);
  const std::size_t n = g.value(words).dim(0);
  if (k == 0 || n == 0) throw ContractViolation("attention: empty tubelets or words");

  Var proj_q = nn::mlp(g, words, mlp_q_);    // N x d
  Var proj_k = nn::mlp(g, pooled, mlp_k_);   // K x d
  Var proj_v = nn::mlp(g, pooled, mlp_v_);   // K x d

  // Rows are words so the softmax normalizes over tubelets.
  Var scores = attention_scores(g, proj_q, proj_k);  // N x K
  Tensor mask({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) mask.at(i, j) = tubelet_valid[j] ? 1.0 : 0.0;
  }
  Var weights = g.masked_softmax_rows(scores, std::move(mask));  // N x K
  Var aggregated = g.matmul(weights, proj_v);                    // N x d
  Var word_proj = word_value_projection(g, words);               // N x d
  Var compat = compat_scores(g, word_proj, aggregated);
  return {weights, compat};
}

Var SpatialModel::compat_scores(Graph& g, Var word_proj, Var aggregated) const {
  if (!config_.normalize_compat) return g.rowwise_dot(word_proj, aggregated);
  Var cos = g.rowwise_dot(g.normalize_rows(word_proj), g.normalize_rows(aggregated));
  return g.scale(cos, 1.0 / config_.temperature);
}

Var SpatialModel::attention_scores(Graph& g, Var proj_q, Var proj_k) const {
  if (config_.normalize_attention) {
    Var cos = g.matmul(g.normalize_rows(proj_q), g.transpose(g.normalize_rows(proj_k)));
    return g.scale(cos, 1.0 / config_.temperature);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.proj_dim));
  return g.scale(g.matmul(proj_q, g.transpose(proj_k)), scale);
}

AttentionMap SpatialModel::attention_map(const TubeletFeatureTensor& feats,
                                         const Tensor& words) {
  Graph g;
  std::vector<bool> tubelet_valid;
  Var pooled = enhance_tubelets(g, feats, tubelet_valid);
  AttentionVars vars = attention(g, pooled, tubelet_valid, g.constant(words));
  AttentionMap map;
  const Tensor& w = g.value(vars.weights_cols);  // N x K
  const std::size_t n = w.dim(0);
  const std::size_t k = w.dim(1);
  map.weights = Tensor({k, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) map.weights.at(j, i) = w.at(i, j);
  }
  map.compat_scores = g.value(vars.compat);
  map.tubelet_valid = std::move(tubelet_valid);
  return map;
}

std::size_t select_tubelet(const AttentionMap& map) {
  const std::size_t k = map.weights.dim(0);
  const std::size_t n = map.weights.dim(1);
  if (k == 0) throw ContractViolation("select_tubelet: empty attention map");
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t ki = 0; ki < k; ++ki) {
    double mean = 0.0;
    for (std::size_t m = 0; m < n; ++m) mean += map.weights.at(ki, m);
    mean /= static_cast<double>(n);
    if (mean > best_score) {
      best_score = mean;
      best = ki;
    }
  }
  return best;
}

Var SpatialModel::spatial_loss(Graph& g, const std::vector<BatchItem>& batch) {
  const std::size_t b = batch.size();
  if (config_.negatives == SpatialConfig::Negatives::CrossVideo && b < 2) {
    throw ContractViolation("spatial_loss: batch size must be >= 2 (no negatives available)");
  }
  if (b == 0) throw ContractViolation("spatial_loss: empty batch");

  // Per-item projections are shared across all (i, j) pairings.
  std::vector<Var> pooled(b), proj_k(b), proj_v(b), proj_q(b), word_proj(b), words(b);
  std::vector<std::vector<bool>> valid(b);
  for (std::size_t i = 0; i < b; ++i) {
    words[i] = g.constant(batch[i].words);
    pooled[i] = enhance_tubelets(g, *batch[i].features, valid[i]);
    proj_k[i] = nn::mlp(g, pooled[i], mlp_k_);
    proj_v[i] = nn::mlp(g, pooled[i], mlp_v_);
    proj_q[i] = nn::mlp(g, words[i], mlp_q_);
    word_proj[i] = word_value_projection(g, words[i]);
  }

  const auto compat = [&](std::size_t qi, std::size_t vj) -> Var {
    const std::size_t n = g.value(words[qi]).dim(0);
    const std::size_t k = g.value(pooled[vj]).dim(0);
    Var scores = attention_scores(g, proj_q[qi], proj_k[vj]);
    Tensor mask({n, k});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < k; ++c) mask.at(r, c) = valid[vj][c] ? 1.0 : 0.0;
    }
    Var weights = g.masked_softmax_rows(scores, std::move(mask));
    Var aggregated = g.matmul(weights, proj_v[vj]);
    return compat_scores(g, word_proj[qi], aggregated);  // N
  };

  Var total = g.constant(Tensor::scalar(0.0));
  if (config_.negatives == SpatialConfig::Negatives::CrossVideo) {
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t n = g.value(words[i]).dim(0);
      Var pos = compat(i, i);  // N
      std::vector<Var> neg_cols;
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i) continue;
        neg_cols.push_back(g.reshape(compat(i, j), {n, 1}));
      }
      if (config_.denominator == SpatialConfig::Denominator::Inclusive) {
        neg_cols.push_back(g.reshape(pos, {n, 1}));
      }
      // Stack as N x (B-1) by concatenating transposed columns.
      std::vector<Var> neg_rows;
      for (Var c : neg_cols) neg_rows.push_back(g.transpose(c));  // 1 x N
      Var negs = g.transpose(g.concat_rows(neg_rows));            // N x (B-1)
      Var lse = g.logsumexp_rows(negs);                           // N
      Var item_loss = g.sum(g.sub(lse, pos));
      total = g.add(total, item_loss);
    }
  } else {
    // Within-video contrast: the highest-attention tubelet acts as the
    // pseudo-positive against the remaining tubelets of the same video.
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t n = g.value(words[i]).dim(0);
      const std::size_t k = g.value(pooled[i]).dim(0);
      std::size_t k_valid = 0;
      for (const bool v : valid[i]) k_valid += v ? 1 : 0;
      if (k_valid < 2) {
        throw ContractViolation("within-video spatial loss requires >= 2 valid tubelets");
      }
      Var scores = attention_scores(g, proj_q[i], proj_k[i]);
      Tensor mask({n, k});
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < k; ++c) mask.at(r, c) = valid[i][c] ? 1.0 : 0.0;
      }
      Var weights = g.masked_softmax_rows(scores, std::move(mask));  // N x K
      // Per-tubelet compatibility: weight * <word value, tubelet value>.
      Var wp_i = config_.normalize_compat ? g.normalize_rows(word_proj[i]) : word_proj[i];
      Var pv_i = config_.normalize_compat ? g.normalize_rows(proj_v[i]) : proj_v[i];
      Var pair_dots = g.matmul(wp_i, g.transpose(pv_i));  // N x K
      if (config_.normalize_compat) {
        pair_dots = g.scale(pair_dots, 1.0 / config_.temperature);
      }
      Var per_tubelet = g.mul(weights, pair_dots);                     // N x K
      const Tensor& wv = g.value(weights);
      std::size_t k_star = 0;
      double best = -1.0;
      for (std::size_t c = 0; c < k; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += wv.at(r, c);
        if (mean > best) {
          best = mean;
          k_star = c;
        }
      }
      std::vector<std::pair<std::size_t, std::size_t>> pos_idx;
      for (std::size_t r = 0; r < n; ++r) pos_idx.emplace_back(r, k_star);
      Var pos = g.select_entries(per_tubelet, std::move(pos_idx));  // N
      std::vector<Var> neg_rows;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == k_star || !valid[i][c]) continue;
        std::vector<std::pair<std::size_t, std::size_t>> col_idx;
        for (std::size_t r = 0; r < n; ++r) col_idx.emplace_back(r, c);
        neg_rows.push_back(g.reshape(g.select_entries(per_tubelet, std::move(col_idx)), {1, n}));
      }
      if (config_.denominator == SpatialConfig::Denominator::Inclusive) {
        neg_rows.push_back(g.reshape(pos, {1, n}));
      }
      Var negs = g.transpose(g.concat_rows(neg_rows));  // N x (K-1)
      Var lse = g.logsumexp_rows(negs);
      total = g.add(total, g.sum(g.sub(lse, pos)));
    }
  }
  return g.scale(total, 1.0 / static_cast<double>(b));
}

double SpatialModel::spatial_loss_backward(const std::vector<BatchItem>& batch) {
  Graph g;
  Var loss = spatial_loss(g, batch);
  g.backward(loss);
  return g.value(loss).item();
}

Tensor referral_word_matrix(const QueryEmbedding& query,
                            const referral::DecomposedQuery& decomp) {
  if (!query.consistent() || query.tokens.empty()) {
    throw ContractViolation("referral_word_matrix: malformed query embedding");
  }
  std::vector<std::size_t> rows;
  for (const std::size_t i : decomp.global_positions) {
    if (i < query.tokens.size()) rows.push_back(i);
  }
  for (const auto& lq : decomp.local_queries) {
    for (const std::size_t i : lq.source_indices) {
      if (i < query.tokens.size()) rows.push_back(i);
    }
  }
  if (rows.empty()) {
    logging::warn("empty query decomposition; falling back to the original query words");
    return Tensor::from_rows(query.embeddings);
  }
  std::vector<std::vector<double>> gathered;
  gathered.reserve(rows.size());
  for (const std::size_t i : rows) gathered.push_back(query.embeddings[i]);
  return Tensor::from_rows(gathered);
}

}  // namespace tubeground
