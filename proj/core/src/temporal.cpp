#include "tubeground/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tubeground/errors.hpp"
#include "tubeground/log.hpp"

namespace tubeground {

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.tokens_ = tokens;
  if (v.tokens_.size() < 2 || v.tokens_[0] != "<mask>" || v.tokens_[1] != "<unk>") {
    throw DataError("vocabulary must start with <mask> then <unk>");
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.ids_[v.tokens_[i]] = static_cast<std::int64_t>(i);
  }
  return v;
}

Vocabulary Vocabulary::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open vocabulary file: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return from_tokens(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write vocabulary file: " + path.string());
  for (const std::string& t : tokens_) os << t << "\n";
}

std::int64_t Vocabulary::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("vocabulary id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

MaskedQuery mask_query(const std::vector<std::string>& tokens,
                       const std::vector<PosTag>& tags, const Vocabulary& vocab) {
  if (tokens.size() != tags.size()) {
    throw ContractViolation("mask_query: token/tag size mismatch");
  }
  MaskedQuery out;
  out.ids.reserve(tokens.size());
  std::string lowered;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    lowered = tokens[i];
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::int64_t id = vocab.id(lowered);
    const bool maskable =
        tags[i] == PosTag::Noun || tags[i] == PosTag::Adj || tags[i] == PosTag::Verb;
    if (maskable && id != Vocabulary::kMaskId) {
      out.ids.push_back(Vocabulary::kMaskId);
      out.masked_positions.push_back(i);
      out.original_ids.push_back(id);
    } else {
      out.ids.push_back(id);
    }
  }
  if (out.masked_positions.empty()) {
    logging::warn("query has no maskable (noun/adjective/verb) token; skipped for training");
  }
  return out;
}

MaskedQuery mask_query(const QueryEmbedding& query, const Vocabulary& vocab) {
  return mask_query(query.tokens, query.pos_tags, vocab);
}

TemporalModel::TemporalModel(TemporalConfig config, std::size_t vocab_size)
    : config_(config), vocab_size_(vocab_size) {
  if (vocab_size_ < 2) throw ConfigError("vocabulary must hold at least mask and unk");
  if (config_.decoder_blocks < 1) throw ConfigError("decoder needs at least one block");
  std::mt19937_64 rng(config_.seed);
  ca_wq_ = Parameter("temporal.ca_wq",
                     nn::init_uniform({config_.word_dim, config_.model_dim},
                                      config_.word_dim, rng));
  ca_wk_ = Parameter("temporal.ca_wk",
                     nn::init_uniform({config_.clip_dim, config_.model_dim},
                                      config_.clip_dim, rng));
  ca_wv_ = Parameter("temporal.ca_wv",
                     nn::init_uniform({config_.clip_dim, config_.model_dim},
                                      config_.clip_dim, rng));
  tok_emb_ = Parameter("temporal.tok_emb",
                       nn::init_uniform({vocab_size_, config_.model_dim},
                                        config_.model_dim, rng));
  pos_emb_ = Parameter("temporal.pos_emb",
                       nn::init_uniform({config_.max_words, config_.model_dim},
                                        config_.model_dim, rng));
  decoder_ = nn::DecoderParams("temporal.decoder", config_.model_dim, config_.hidden_dim,
                               vocab_size_, rng, config_.decoder_blocks);
}

std::vector<Parameter*> TemporalModel::parameters() {
  std::vector<Parameter*> out = {&ca_wq_, &ca_wk_, &ca_wv_, &tok_emb_, &pos_emb_};
  for (Parameter* p : decoder_.parameters()) out.push_back(p);
  return out;
}

void TemporalModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

HighlightVars TemporalModel::highlight(Graph& g, Var clips, Var words) {
  const Tensor& cv = g.value(clips);
  const Tensor& wv = g.value(words);
  if (cv.rank() != 2 || cv.dim(1) != config_.clip_dim) {
    throw ContractViolation("highlight: clip feature shape mismatch");
  }
  if (wv.rank() != 2 || wv.dim(1) != config_.word_dim) {
    throw ContractViolation("highlight: word embedding shape mismatch");
  }
  const std::size_t c = cv.dim(0);
  const std::size_t n = wv.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.model_dim));

  Var q = g.matmul(words, g.param(ca_wq_));  // N x d
  Var k = g.matmul(clips, g.param(ca_wk_));  // C x d
  Var v = g.matmul(clips, g.param(ca_wv_));  // C x d
  Var attn = g.softmax_rows(g.scale(g.matmul(q, g.transpose(k)), scale));  // N x C

  Tensor avg({1, n});
  avg.fill(1.0 / static_cast<double>(n));
  Var salience = g.reshape(g.matmul(g.constant(std::move(avg)), attn), {c});  // C

  HighlightVars out;
  out.salience = salience;
  out.memory = g.scale_rows(v, salience);
  return out;
}

Tensor TemporalModel::clip_salience(const Tensor& clips, const Tensor& words) {
  Graph g;
  HighlightVars h = highlight(g, g.constant(clips), g.constant(words));
  return g.value(h.salience);
}

Var TemporalModel::embed_tokens(Graph& g, const std::vector<std::int64_t>& ids) {
  if (ids.empty()) throw ContractViolation("embed_tokens: empty sequence");
  if (ids.size() > config_.max_words) {
    throw ContractViolation("sequence length " + std::to_string(ids.size()) +
                            " exceeds max_words " + std::to_string(config_.max_words));
  }
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const std::int64_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
      throw DataError("token id out of vocabulary range: " + std::to_string(id));
    }
    rows.push_back(static_cast<std::size_t>(id));
  }
  Var tok = g.gather_rows(g.param(tok_emb_), std::move(rows));
  Var pos = g.slice_rows(g.param(pos_emb_), 0, ids.size());
  return g.add(tok, pos);
}

Var TemporalModel::reconstruction_loss(Graph& g, Var memory, const MaskedQuery& masked) {
  if (!masked.trainable() && !config_.score_all_positions) {
    throw ContractViolation("reconstruction_loss: query has no masked positions");
  }
  Var inputs = embed_tokens(g, masked.ids);
  nn::DecoderOutput dec = nn::decoder_block(g, inputs, memory, decoder_);

  std::vector<std::pair<std::size_t, std::size_t>> targets;
  if (config_.score_all_positions) {
    std::size_t mi = 0;
    for (std::size_t i = 0; i < masked.ids.size(); ++i) {
      std::int64_t original = masked.ids[i];
      if (mi < masked.masked_positions.size() && masked.masked_positions[mi] == i) {
        original = masked.original_ids[mi];
        ++mi;
      }
      targets.emplace_back(i, static_cast<std::size_t>(original));
    }
  } else {
    for (std::size_t mi = 0; mi < masked.masked_positions.size(); ++mi) {
      targets.emplace_back(masked.masked_positions[mi],
                           static_cast<std::size_t>(masked.original_ids[mi]));
    }
  }
  Var picked = g.select_entries(dec.log_probs, std::move(targets));
  return g.scale(g.sum(picked), -1.0);
}

double TemporalModel::reconstruction_loss_backward(const std::vector<BatchItem>& batch) {
  if (batch.empty()) throw ContractViolation("reconstruction_loss: empty batch");
  Graph g;
  Var total = g.constant(Tensor::scalar(0.0));
  for (const BatchItem& item : batch) {
    HighlightVars h = highlight(g, g.constant(item.clips), g.constant(item.words));
    total = g.add(total, reconstruction_loss(g, h.memory, item.masked));
  }
  Var loss = g.scale(total, 1.0 / static_cast<double>(batch.size()));
  g.backward(loss);
  return g.value(loss).item();
}

FrameInterval predict_bounds(const Tensor& salience, std::int64_t video_length,
                             std::int64_t clip_len, double tau) {
  if (salience.rank() != 1 || salience.size() == 0) {
    throw ContractViolation("predict_bounds: nonempty salience vector required");
  }
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("predict_bounds: tau must be in (0, 1]");
  if (video_length < 1 || clip_len < 1) {
    throw ContractViolation("predict_bounds: bad video length or clip length");
  }
  const std::size_t c = salience.size();
  double max_sal = salience[0];
  for (std::size_t i = 1; i < c; ++i) max_sal = std::max(max_sal, salience[i]);
  const double threshold = tau * max_sal;

  std::size_t best_start = 0;
  std::size_t best_end = 0;
  double best_total = -1.0;
  std::size_t i = 0;
  while (i < c) {
    if (salience[i] < threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double total = 0.0;
    while (j < c && salience[j] >= threshold) {
      total += salience[j];
      ++j;
    }
    if (total > best_total) {  // strict: ties keep the earliest run
      best_total = total;
      best_start = i;
      best_end = j;
    }
    i = j;
  }
  FrameInterval out;
  out.start = static_cast<std::int64_t>(best_start) * clip_len;
  out.end = std::min(static_cast<std::int64_t>(best_end) * clip_len, video_length);
  out.start = std::min(out.start, video_length - 1);
  if (out.end <= out.start) out.end = out.start + 1;
  return out;
}

}  // namespace tubeground
