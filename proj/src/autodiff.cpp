#include "diaurec/autodiff.hpp"

#include <cmath>
#include <string>

#include "diaurec/data_core.hpp"
#include "diaurec/error.hpp"

namespace diaurec::ad {

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> backward) {
  nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad, std::move(backward)});
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  n.grad += g;
}

Var Tape::leaf(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "tape add");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.nodes_[self].grad * s);
  });
}

Var Tape::mul_const(Var a, const Matrix& c) {
  return push(hadamard(value(a), c), needs(a), [a, c](Tape& t, std::size_t self) {
    t.accumulate(a.id, hadamard(t.nodes_[self].grad, c));
  });
}

Var Tape::matmul(Var a, Var b) {
  return push(diaurec::matmul(value(a), value(b)), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.needs(a)) t.accumulate(a.id, diaurec::matmul_nt(g, t.value(b)));
    if (t.needs(b)) t.accumulate(b.id, diaurec::matmul_tn(t.value(a), g));
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  return push(diaurec::matmul_nt(value(a), value(b)), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.needs(a)) t.accumulate(a.id, diaurec::matmul(g, t.value(b)));
    if (t.needs(b)) t.accumulate(b.id, diaurec::matmul_tn(g, t.value(a)));
  });
}

Var Tape::add_row(Var a, Var bias) {
  const Matrix& av = value(a);
  const Matrix& bv = value(bias);
  require_shape(bv, 1, av.cols(), "tape add_row bias");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  return push(std::move(out), needs(a) || needs(bias), [a, bias](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
    if (t.needs(bias)) {
      Matrix gb(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
      t.accumulate(bias.id, gb);
    }
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a);
  for (double& x : out.data()) x = std::tanh(x);
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g = n.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = n.value.data()[i];
      g.data()[i] *= 1.0 - y * y;
    }
    t.accumulate(a.id, g);
  });
}

Var Tape::normalize_rows(Var a) {
  const Matrix& av = value(a);
  std::vector<double> norms(av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) norms[i] = norm(av.row(i));
  return push(diaurec::normalize_rows(av), needs(a), [a, norms = std::move(norms)](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    // d(x/|x|) = (I - y yᵀ)/|x| applied to the upstream gradient.
    Matrix g(n.grad.rows(), n.grad.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const auto y = n.value.row(i);
      const auto up = n.grad.row(i);
      const double proj = dot(y, up);
      auto dst = g.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (up[j] - proj * y[j]) / norms[i];
    }
    t.accumulate(a.id, g);
  });
}

Var Tape::softmax_rows(Var a, double temperature) {
  return push(diaurec::softmax_rows(value(a), temperature), needs(a), [a, temperature](Tape& t, std::size_t self) {
    const Node& n = t.nodes_[self];
    Matrix g(n.grad.rows(), n.grad.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const auto p = n.value.row(i);
      const auto up = n.grad.row(i);
      const double inner = dot(p, up);
      auto dst = g.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = p[j] * (up[j] - inner) / temperature;
    }
    t.accumulate(a.id, g);
  });
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> index) {
  Matrix out = diaurec::gather_rows(value(a), index);
  return push(std::move(out), needs(a), [a, index = std::move(index)](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& av = t.value(a);
    Matrix scattered(av.rows(), av.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
      auto dst = scattered.row(index[i]);
      const auto src = g.row(i);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
    t.accumulate(a.id, scattered);
  });
}

Var Tape::vstack(Var top, Var bottom) {
  return push(diaurec::vstack(value(top), value(bottom)), needs(top) || needs(bottom),
              [top, bottom](Tape& t, std::size_t self) {
                const Matrix& g = t.nodes_[self].grad;
                const std::size_t split = t.value(top).rows();
                t.accumulate(top.id, slice_rows(g, 0, split));
                t.accumulate(bottom.id, slice_rows(g, split, g.rows() - split));
              });
}

Var Tape::graph_step(const InteractionGraph& graph, Var stacked) {
  return push(graph.step_stacked(value(stacked)), needs(stacked), [&graph, stacked](Tape& t, std::size_t self) {
    t.accumulate(stacked.id, graph.step_stacked(t.nodes_[self].grad));
  });
}

Var Tape::sum_squares(Var a) {
  return push(Matrix(1, 1, frobenius_squared(value(a))), needs(a), [a](Tape& t, std::size_t self) {
    const double up = t.nodes_[self].grad(0, 0);
    t.accumulate(a.id, t.value(a) * (2.0 * up));
  });
}

Var Tape::scalar(std::span<const Var> inputs, ScalarResult result) {
  if (result.grads.size() != inputs.size()) fail(ErrorKind::Shape, "tape scalar: gradient count mismatch");
  bool any = false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    require_same_shape(value(inputs[i]), result.grads[i], "tape scalar gradient");
    any = any || needs(inputs[i]);
  }
  std::vector<Var> in(inputs.begin(), inputs.end());
  return push(Matrix(1, 1, result.value), any,
              [in = std::move(in), grads = std::move(result.grads)](Tape& t, std::size_t self) {
                const double up = t.nodes_[self].grad(0, 0);
                for (std::size_t i = 0; i < in.size(); ++i) t.accumulate(in[i].id, grads[i] * up);
              });
}

void Tape::backward(Var root) {
  require_shape(value(root), 1, 1, "backward root");
  for (auto& n : nodes_) n.grad = Matrix{};
  nodes_[root.id].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (auto& n : nodes_)
    if (n.requires_grad && n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
}

}  // namespace diaurec::ad
