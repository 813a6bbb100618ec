#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "diaurec/matrix.hpp"

namespace diaurec {

class InteractionGraph;

namespace ad {

class Tape;

// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
};

// Value and gradients of a scalar function of several matrices.
struct ScalarResult {
  double value = 0.0;
  std::vector<Matrix> grads;  // one per input, same shapes
};

// Minimal reverse-mode tape over dense matrices. Nodes are appended in
// evaluation order; backward() walks them in reverse.
class Tape {
 public:
  Var leaf(Matrix value);
  Var constant(Matrix value);

  Var add(Var a, Var b);
  Var scale(Var a, double s);
  Var mul_const(Var a, const Matrix& c);   // elementwise a ⊙ c
  Var matmul(Var a, Var b);                // a·b
  Var matmul_nt(Var a, Var b);             // a·bᵀ
  Var add_row(Var a, Var bias);            // a + 1·bias
  Var tanh(Var a);
  Var normalize_rows(Var a);
  Var softmax_rows(Var a, double temperature);
  Var gather_rows(Var a, std::vector<std::size_t> index);
  Var vstack(Var top, Var bottom);
  Var graph_step(const InteractionGraph& graph, Var stacked);
  Var sum_squares(Var a);

  // Scalar node whose value and input gradients were computed eagerly
  // (fused closed-form losses).
  Var scalar(std::span<const Var> inputs, ScalarResult result);

  void backward(Var root);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> backward);
  void accumulate(std::size_t id, const Matrix& g);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace ad
}  // namespace diaurec
