#include "tubeground/nn.hpp"

#include <cmath>

#include "tubeground/errors.hpp"

namespace tubeground::nn {

Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                    std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

LinearParams::LinearParams(const std::string& name, std::size_t in, std::size_t out,
                           std::mt19937_64& rng)
    : weight(name + ".weight", init_uniform({in, out}, in, rng)),
      bias(name + ".bias", Tensor({out})) {}

std::vector<Parameter*> LinearParams::parameters() {
  return {&weight, &bias};
}

MlpParams::MlpParams(const std::string& name, std::size_t in, std::size_t hidden,
                     std::size_t out, std::mt19937_64& rng, Activation act)
    : l1(name + ".l1", in, hidden, rng), l2(name + ".l2", hidden, out, rng),
      activation(act) {}

std::vector<Parameter*> MlpParams::parameters() {
  return {&l1.weight, &l1.bias, &l2.weight, &l2.bias};
}

Var linear(Graph& g, Var x, LinearParams& p) {
  return g.add_rowvec(g.matmul(x, g.param(p.weight)), g.param(p.bias));
}

Var mlp(Graph& g, Var x, MlpParams& p) {
  Var h = linear(g, x, p.l1);
  switch (p.activation) {
    case Activation::Relu: h = g.relu(h); break;
    case Activation::Gelu: h = g.gelu(h); break;
    case Activation::None: break;
  }
  return linear(g, h, p.l2);
}

Tensor softmax(const Tensor& scores, std::size_t axis) {
  if (!scores.all_finite()) throw NumericError("softmax: non-finite scores");
  if (scores.rank() == 1) {
    Tensor out = scores;
    double mx = out[0];
    for (std::size_t i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::exp(out[i] - mx);
      denom += out[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= denom;
    return out;
  }
  if (scores.rank() != 2 || axis > 1) {
    throw ContractViolation("softmax: rank-2 tensor with axis 0 or 1 required");
  }
  const std::size_t rows = scores.dim(0);
  const std::size_t cols = scores.dim(1);
  Tensor out({rows, cols});
  if (axis == 1) {
    for (std::size_t i = 0; i < rows; ++i) {
      double mx = scores.at(i, 0);
      for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, scores.at(i, j));
      double denom = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        out.at(i, j) = std::exp(scores.at(i, j) - mx);
        denom += out.at(i, j);
      }
      for (std::size_t j = 0; j < cols; ++j) out.at(i, j) /= denom;
    }
  } else {
    for (std::size_t j = 0; j < cols; ++j) {
      double mx = scores.at(0, j);
      for (std::size_t i = 1; i < rows; ++i) mx = std::max(mx, scores.at(i, j));
      double denom = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        out.at(i, j) = std::exp(scores.at(i, j) - mx);
        denom += out.at(i, j);
      }
      for (std::size_t i = 0; i < rows; ++i) out.at(i, j) /= denom;
    }
  }
  return out;
}

AttentionResult scaled_dot_attention(Graph& g, Var queries, Var keys, Var values,
                                     double scale, const std::vector<bool>& key_valid,
                                     bool causal) {
  const Tensor& qv = g.value(queries);
  const Tensor& kv = g.value(keys);
  if (qv.rank() != 2 || kv.rank() != 2 || qv.dim(1) != kv.dim(1)) {
    throw ContractViolation("scaled_dot_attention: query/key dim mismatch");
  }
  const std::size_t nq = qv.dim(0);
  const std::size_t nk = kv.dim(0);
  if (!key_valid.empty() && key_valid.size() != nk) {
    throw ContractViolation("scaled_dot_attention: key_valid size mismatch");
  }

  Var scores = g.scale(g.matmul(queries, g.transpose(keys)), scale);
  Tensor mask({nq, nk});
  std::vector<bool> fully_masked(nq, false);
  for (std::size_t i = 0; i < nq; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < nk; ++j) {
      const bool ok = (key_valid.empty() || key_valid[j]) && (!causal || j <= i);
      mask.at(i, j) = ok ? 1.0 : 0.0;
      any = any || ok;
    }
    fully_masked[i] = !any;
  }
  Var weights = g.masked_softmax_rows(scores, std::move(mask));
  Var output = g.matmul(weights, values);
  return {output, weights, std::move(fully_masked)};
}

TemporalSelfAttentionParams::TemporalSelfAttentionParams(const std::string& name,
                                                         std::size_t dim,
                                                         std::mt19937_64& rng)
    : w_query(name + ".w_query", init_uniform({dim, dim}, dim, rng)),
      w_key(name + ".w_key", init_uniform({dim, dim}, dim, rng)) {}

std::vector<Parameter*> TemporalSelfAttentionParams::parameters() {
  return {&w_query, &w_key};
}

Var temporal_self_attention(Graph& g, Var sequence, const std::vector<bool>& valid,
                            TemporalSelfAttentionParams& p) {
  const Tensor& seq = g.value(sequence);
  if (seq.rank() != 2) throw ContractViolation("temporal_self_attention: matrix required");
  const std::size_t frames = seq.dim(0);
  const std::size_t dim = seq.dim(1);
  if (valid.size() != frames) {
    throw ContractViolation("temporal_self_attention: validity mask size mismatch");
  }
  Var q = g.matmul(sequence, g.param(p.w_query));
  Var k = g.matmul(sequence, g.param(p.w_key));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  AttentionResult att = scaled_dot_attention(g, q, k, sequence, scale, valid);
  Var mixed = g.scale(g.add(sequence, att.output), 0.5);
  // Zero rows for invalid frames so they do not leak through the residual.
  Tensor row_gate({frames, dim});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < dim; ++d) row_gate.at(t, d) = valid[t] ? 1.0 : 0.0;
  }
  return g.mul(mixed, g.constant(std::move(row_gate)));
}

DecoderBlockParams::DecoderBlockParams(const std::string& name, std::size_t dim,
                                       std::size_t hidden, std::mt19937_64& rng)
    : w_self_q(name + ".w_self_q", init_uniform({dim, dim}, dim, rng)),
      w_self_k(name + ".w_self_k", init_uniform({dim, dim}, dim, rng)),
      w_self_v(name + ".w_self_v", init_uniform({dim, dim}, dim, rng)),
      w_cross_q(name + ".w_cross_q", init_uniform({dim, dim}, dim, rng)),
      w_cross_k(name + ".w_cross_k", init_uniform({dim, dim}, dim, rng)),
      w_cross_v(name + ".w_cross_v", init_uniform({dim, dim}, dim, rng)),
      ffn1(name + ".ffn1", dim, hidden, rng),
      ffn2(name + ".ffn2", hidden, dim, rng) {}

std::vector<Parameter*> DecoderBlockParams::parameters() {
  std::vector<Parameter*> out = {&w_self_q,  &w_self_k,  &w_self_v,
                                 &w_cross_q, &w_cross_k, &w_cross_v};
  for (Parameter* p : ffn1.parameters()) out.push_back(p);
  for (Parameter* p : ffn2.parameters()) out.push_back(p);
  return out;
}

DecoderParams::DecoderParams(const std::string& name, std::size_t dim,
                             std::size_t hidden, std::size_t vocab_size,
                             std::mt19937_64& rng, std::size_t n_blocks)
    : bos(name + ".bos", init_uniform({1, dim}, dim, rng)) {
  for (std::size_t i = 0; i < n_blocks; ++i) {
    blocks.emplace_back(name + ".block" + std::to_string(i), dim, hidden, rng);
  }
  vocab = LinearParams(name + ".vocab", dim, vocab_size, rng);
}

std::vector<Parameter*> DecoderParams::parameters() {
  std::vector<Parameter*> out = {&bos};
  for (DecoderBlockParams& b : blocks) {
    for (Parameter* p : b.parameters()) out.push_back(p);
  }
  for (Parameter* p : vocab.parameters()) out.push_back(p);
  return out;
}

DecoderOutput decoder_block(Graph& g, Var inputs, Var memory, DecoderParams& p) {
  const Tensor& in = g.value(inputs);
  if (in.rank() != 2) throw ContractViolation("decoder_block: matrix input required");
  if (p.blocks.empty()) throw ContractViolation("decoder_block: no blocks configured");
  const std::size_t n = in.dim(0);
  const std::size_t dim = in.dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));

  // Shift right: position m sees the start token plus inputs < m.
  Var h;
  if (n == 1) {
    h = g.param(p.bos);
  } else {
    h = g.concat_rows({g.param(p.bos), g.slice_rows(inputs, 0, n - 1)});
  }

  for (DecoderBlockParams& blk : p.blocks) {
    Var sq = g.matmul(h, g.param(blk.w_self_q));
    Var sk = g.matmul(h, g.param(blk.w_self_k));
    Var sv = g.matmul(h, g.param(blk.w_self_v));
    AttentionResult self_att = scaled_dot_attention(g, sq, sk, sv, scale, {}, true);
    h = g.add(h, self_att.output);

    Var cq = g.matmul(h, g.param(blk.w_cross_q));
    Var ck = g.matmul(memory, g.param(blk.w_cross_k));
    Var cv = g.matmul(memory, g.param(blk.w_cross_v));
    AttentionResult cross_att = scaled_dot_attention(g, cq, ck, cv, scale);
    h = g.add(h, cross_att.output);

    Var f = linear(g, h, blk.ffn1);
    f = g.gelu(f);
    f = linear(g, f, blk.ffn2);
    h = g.add(h, f);
  }

  DecoderOutput out;
  out.logits = linear(g, h, p.vocab);
  out.log_probs = g.log_softmax_rows(out.logits);
  out.distributions = g.softmax_rows(out.logits);
  return out;
}

}  // namespace tubeground::nn
