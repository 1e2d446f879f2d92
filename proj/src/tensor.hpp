#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rng.hpp"
#include "util.hpp"

namespace rankvocab {

// Dense row-major 64-bit float array. Scalars use shape {1}.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor from(std::vector<int64_t> shape, std::vector<double> values);
  static Tensor scalar(double v) { return from({1}, {v}); }
  static Tensor row_vector(std::vector<double> values);

  int64_t numel() const;
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_str() const;  // e.g. "[3x4]"
};

class Tape;

// Handle to a node on a tape. Plain value type; cheap to copy.
struct Var {
  int32_t id = -1;
  Tape* tape = nullptr;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are appended in execution order, which is
// already topological; backward walks the records once in reverse. One tape
// per training step; not thread-safe (independent tapes may run in parallel).
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(Var v) const;
  /// Gradient accumulated by the last backward(); zeros if untouched.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and walks the tape in reverse, touching each
  /// record exactly once. `loss` must be scalar.
  void backward(Var loss);

  Var add(Var a, Var b);
  Var add_n(const std::vector<Var>& xs);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var x, double c);
  Var matmul(Var a, Var b);       // [m x k] * [k x n] -> [m x n]
  Var matvec(Var a, Var x);       // [m x k] * [k] -> [m]
  Var add_bias(Var m, Var bias);  // [T x F] + [F], broadcast over rows
  Var relu(Var x);                // subgradient at 0 is 0
  Var tanh(Var x);
  /// input [L x D], filters [F x h x D], bias [F] -> [(L-h+1) x F].
  Var conv1d_valid(Var input, Var filters, Var bias);
  /// [T x F] -> [F]; ties route gradient to the first argmax row.
  Var max_over_time(Var input);
  Var softmax(Var x);  // [n] -> [n], stabilized by max subtraction
  Var dot(Var a, Var b);
  Var sum(Var x);
  Var stack_scalars(const std::vector<Var>& xs);
  /// vecs: B vectors of shape [F]; weights: [B] -> sum_b w[b] * vecs[b].
  Var weighted_sum(const std::vector<Var>& vecs, Var weights);
  /// Drops whole channels (columns of [L x D]) with probability p and scales
  /// survivors by 1/(1-p). Identity (same Var) when p == 0 or not training.
  Var spatial_dropout(Var x, double p, bool train, CounterRng* rng);
  /// -log softmax(logits)[label], computed in log space.
  Var cross_entropy(Var logits, int64_t label);
  /// Gathers rows of `table` [N x D] at `indices` -> [len x D].
  Var embed_rows(Var table, std::span<const int64_t> indices);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::function<void(Tape&)> back;  // null for leaves / untracked outputs
  };

  Var push(Tensor value, bool requires_grad);
  void set_back(Var v, std::function<void(Tape&)> back);
  Tensor& grad_buf(int32_t id);
  const Tensor& out_grad(int32_t id) const { return nodes_[static_cast<size_t>(id)].grad; }
  const Tensor& val(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int64_t checked = 0;
  int64_t skipped = 0;  // coordinates sitting on a kink
};

/// Central-difference check of a scalar function's gradients. `f` receives
/// the parameters and, when `grads` is non-null, must fill one gradient
/// tensor per parameter; it must be deterministic (fixed seeds inside).
/// Coordinates are sampled (up to max_coords per tensor) and one-sided slopes
/// that disagree flag a kink, which is skipped rather than failed.
GradCheckReport grad_check(
    const std::function<double(const std::vector<Tensor>&, std::vector<Tensor>*)>& f,
    std::vector<Tensor> params, double eps = 1e-5, int64_t max_coords = 40, uint64_t seed = 0);

}  // namespace rankvocab
