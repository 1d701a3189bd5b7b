#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tubeground/tensor.hpp"

namespace tubeground {

/// A named trainable tensor with an accumulated gradient of the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor gradient;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), gradient(value.shape()) {}

  void zero_grad() { gradient.fill(0.0); }
};

struct Var {
  std::uint32_t index = 0;
};

/// Reverse-mode autodiff over small dense tensors. Nodes are appended in
/// topological order; backward() walks them in reverse. One Graph per
/// forward/backward pass; parameters outlive the graph.
class Graph {
 public:
  Var constant(Tensor value);
  Var param(Parameter& p);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_rowvec(Var m, Var v);
  Var relu(Var a);
  Var gelu(Var a);
  Var log(Var a);
  Var exp(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var rowwise_dot(Var a, Var b);
  Var softmax_rows(Var a);
  /// Row softmax restricted to entries where mask != 0. Fully masked rows
  /// produce all-zero output (and propagate zero gradient).
  Var masked_softmax_rows(Var a, Tensor mask);
  Var log_softmax_rows(Var a);
  Var logsumexp_rows(Var a);
  Var slice_rows(Var a, std::size_t start, std::size_t count);
  Var concat_rows(const std::vector<Var>& parts);
  /// out[i] = m[indices[i]], duplicates allowed; gradients scatter-add.
  Var gather_rows(Var m, std::vector<std::size_t> indices);
  Var select_entries(Var m, std::vector<std::pair<std::size_t, std::size_t>> idx);
  /// Multiplies row r of m by s[r].
  Var scale_rows(Var m, Var s);
  /// Divides each row by its euclidean norm plus epsilon; a zero row stays
  /// zero.
  Var normalize_rows(Var m, double epsilon = 1e-12);
  Var reshape(Var a, std::vector<std::size_t> shape);

  /// Accumulates d(root)/d(leaf) into every node's grad and adds the result
  /// into each bound Parameter's gradient. root must be a single element.
  void backward(Var root);

  const Tensor& value(Var v) const { return nodes_[v.index].value; }
  const Tensor& grad(Var v) const { return nodes_[v.index].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> parents;
    std::function<void(Graph&, std::uint32_t)> backprop;
  };

  Var emplace(Tensor value, std::vector<std::uint32_t> parents,
              std::function<void(Graph&, std::uint32_t)> backprop);

  Node& node(std::uint32_t i) { return nodes_[i]; }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::uint32_t, Parameter*>> bound_params_;
};

}  // namespace tubeground
