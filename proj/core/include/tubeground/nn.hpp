#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tubeground/graph.hpp"
#include "tubeground/tensor.hpp"

namespace tubeground::nn {

enum class Activation { Relu, Gelu, None };

/// Seeded uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                    std::mt19937_64& rng);

struct LinearParams {
  Parameter weight;  // in x out
  Parameter bias;    // out

  LinearParams() = default;
  LinearParams(const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

/// Two-layer perceptron: in -> hidden -> out with an activation in between.
struct MlpParams {
  LinearParams l1;
  LinearParams l2;
  Activation activation = Activation::Gelu;

  MlpParams() = default;
  MlpParams(const std::string& name, std::size_t in, std::size_t hidden,
            std::size_t out, std::mt19937_64& rng,
            Activation act = Activation::Gelu);
  std::vector<Parameter*> parameters();
};

Var linear(Graph& g, Var x, LinearParams& p);
Var mlp(Graph& g, Var x, MlpParams& p);

/// Numerically stable softmax over one axis of a plain (non-graph) tensor.
/// axis 0 normalizes columns of a matrix; axis 1 (or rank-1 input) rows.
Tensor softmax(const Tensor& scores, std::size_t axis);

struct AttentionResult {
  Var output;
  Var weights;
  /// Rows of the score matrix whose keys were all masked out; those output
  /// rows are zero.
  std::vector<bool> fully_masked;
};

/// softmax(q k^T * scale + mask) v. key_valid marks usable key rows; an
/// empty vector means all keys are valid. causal adds a strict upper
/// triangular mask (query i attends keys <= i).
AttentionResult scaled_dot_attention(Graph& g, Var queries, Var keys, Var values,
                                     double scale,
                                     const std::vector<bool>& key_valid = {},
                                     bool causal = false);

struct TemporalSelfAttentionParams {
  Parameter w_query;  // dim x dim
  Parameter w_key;    // dim x dim

  TemporalSelfAttentionParams() = default;
  TemporalSelfAttentionParams(const std::string& name, std::size_t dim,
                              std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

/// Self-attention over the frame axis of one tubelet sequence with an
/// averaged residual: out = (x + softmax(xWq (xWk)^T / sqrt(d)) x) / 2.
/// Values are the raw inputs, so a constant sequence stays constant and a
/// single valid frame passes through unchanged. Invalid frames neither
/// attend nor are attended and produce zero rows.
Var temporal_self_attention(Graph& g, Var sequence, const std::vector<bool>& valid,
                            TemporalSelfAttentionParams& p);

struct DecoderBlockParams {
  Parameter w_self_q, w_self_k, w_self_v;    // dim x dim
  Parameter w_cross_q, w_cross_k, w_cross_v; // dim x dim (memory is dim-wide)
  LinearParams ffn1;     // dim -> hidden
  LinearParams ffn2;     // hidden -> dim

  DecoderBlockParams() = default;
  DecoderBlockParams(const std::string& name, std::size_t dim, std::size_t hidden,
                     std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
};

struct DecoderParams {
  Parameter bos;         // 1 x dim, start-of-sequence input
  std::vector<DecoderBlockParams> blocks;
  LinearParams vocab;    // dim -> vocab size

  DecoderParams() = default;
  DecoderParams(const std::string& name, std::size_t dim, std::size_t hidden,
                std::size_t vocab_size, std::mt19937_64& rng, std::size_t n_blocks = 1);
  std::vector<Parameter*> parameters();
};

struct DecoderOutput {
  Var logits;         // positions x vocab
  Var log_probs;      // log softmax of logits
  Var distributions;  // softmax of logits
};

/// Autoregressive decoder block over a position x dim input sequence with a
/// dim-wide visual memory. Inputs are shifted right behind a learned start
/// token, so the distribution at position m depends only on input positions
/// strictly before m (and the memory).
DecoderOutput decoder_block(Graph& g, Var inputs, Var memory, DecoderParams& p);

}  // namespace tubeground::nn
